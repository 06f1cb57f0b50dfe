#pragma once

#include <cstddef>
#include <functional>

namespace mmgr {

/// Worker cap from MMGR_THREADS; unset, empty or 0 means hardware concurrency.
/// ConfigError for values that are not non-negative integers.
std::size_t worker_threads();

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index runs
/// exactly once; callers write results by index so the reduction order stays
/// fixed. The first exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace mmgr
