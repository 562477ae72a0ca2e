#pragma once

#include <cstddef>
#include <functional>

namespace mmreg {

/// Worker cap from MMREG_THREADS (0 or unset = hardware concurrency).
std::size_t worker_count();

/// Runs fn(0..n-1) across up to worker_count() threads. Tasks must write to
/// disjoint outputs; callers reduce the results in index order, so the outcome
/// never depends on the number of workers. The first exception is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace mmreg
