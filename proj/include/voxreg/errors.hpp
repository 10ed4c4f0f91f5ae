#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace vxr {

// Error kinds map onto process exit codes: validation -> 1, runtime -> 2.
enum class ErrorKind { Validation = 1, Runtime = 2 };

// All failures carry a stable machine-readable code (e.g. "insufficient-history",
// "singular-design") plus a human-readable message.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& code() const { return code_; }

private:
  ErrorKind kind_;
  std::string code_;
};

[[noreturn]] inline void fail_validation(const std::string& code, const std::string& message) {
  throw Error(ErrorKind::Validation, code, message);
}

[[noreturn]] inline void fail_runtime(const std::string& code, const std::string& message) {
  throw Error(ErrorKind::Runtime, code, message);
}

inline void require(bool condition, const std::string& code, const std::string& message) {
  if (!condition) fail_validation(code, message);
}

}  // namespace vxr
