#pragma once

#include <cstddef>
#include <functional>

namespace shiftlab {

// Worker count: SHIFTLAB_THREADS when set to a positive integer, otherwise
// the number of hardware threads (at least 1).
std::size_t worker_count();

// Calls fn(i) for i in [0, n) across worker_count() threads in contiguous
// chunks. Callers write results by index, so output is independent of the
// thread count. The first exception thrown by any worker is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace shiftlab
