#pragma once

#include <cstddef>
#include <functional>

namespace omqa {

// Process-wide worker count (default: hardware concurrency, at least 1).
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs fn(i) for i in [0, n). Work is split by index, so results written to
// per-index slots do not depend on the thread count. The first exception is
// rethrown after all workers finish.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace omqa
