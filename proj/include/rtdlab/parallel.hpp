#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

#include <omp.h>

namespace rtdlab {

[[nodiscard]] inline int default_workers() { return omp_get_max_threads(); }

// Runs body(i) for i in [0, n) on `workers` OpenMP threads. Each index owns
// its output slot, so results never depend on scheduling. The first
// exception thrown by any body is rethrown on the calling thread.
template <class Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<long long>(n);
#pragma omp parallel for num_threads(workers) schedule(dynamic, 1)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace rtdlab
