#pragma once

#include <cstddef>
#include <functional>

namespace vxr {

// Number of worker threads for a requested count (0 = all available cores).
int resolve_threads(int requested);

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend
// only on (n, threads), and callers write to disjoint preallocated slots, so
// results are identical for any thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace vxr
