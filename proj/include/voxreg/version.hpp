#pragma once

namespace vxr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vxr
