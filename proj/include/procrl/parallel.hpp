#ifndef PROCRL_PARALLEL_HPP_
#define PROCRL_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace procrl {

// Worker count: PROCRL_THREADS when set, otherwise the logical core count.
int worker_count();
void set_worker_count(int workers);

// Calls fn(i) for every i in [0, n). Iterations must write only to
// index-owned output slots; results are then independent of scheduling.
// The first exception thrown by any iteration is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace procrl

#endif  // PROCRL_PARALLEL_HPP_
