#pragma once

#include <cstddef>
#include <functional>

namespace fxchain {

// Upper bound on worker threads used by parallel_for (default 1).
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs fn(i) for every i in [0, n). Callers write results to slot i only, so
// the outcome does not depend on scheduling. The exception of the lowest
// failing index is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace fxchain
