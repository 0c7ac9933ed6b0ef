#pragma once

#include <cstdint>
#include <functional>

namespace amdl {

// Worker count for batch-parallel operators. Resolved once from AMDL_THREADS;
// unset or 1 selects the single-threaded reference mode. Parallel regions are
// restricted to disjoint writes, so results are bitwise identical at any
// thread count.
int thread_count();

// Testing hook; overrides the environment value for the current process.
void set_thread_count(int n);

// Splits [0, n) into contiguous chunks and runs body(begin, end) on each.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body);

}  // namespace amdl
