#pragma once

#include <cstddef>
#include <functional>

namespace hjreg {

/// Process-wide cap on worker threads used by batch operations (default 1).
void set_thread_count(int threads);
int thread_count();

/// Runs body(i) for i in [0, n). Each index is visited exactly once; results
/// must be written to per-index slots so output does not depend on scheduling.
/// The first exception thrown by any worker is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace hjreg
