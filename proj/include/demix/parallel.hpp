#pragma once

#include "demix/common.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace demix {

/// Process-wide worker count used by parallel_for. Zero restores the default
/// (hardware concurrency).
void set_thread_count(unsigned count);
unsigned thread_count();

namespace detail {
bool& inside_parallel_region();
}

/// Runs body(i) for i in [0, n). Work is claimed dynamically, so body must only
/// write to slots owned by its own index. Nested calls run serially on the
/// calling thread. The first exception (lowest index) is rethrown.
template <typename Body>
void parallel_for(Index n, Body&& body) {
  const unsigned workers =
      static_cast<unsigned>(std::min<Index>(n, static_cast<Index>(thread_count())));
  if (n <= 0) return;
  if (workers <= 1 || detail::inside_parallel_region()) {
    for (Index i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<Index> next{0};
  std::mutex error_mutex;
  Index error_index = n;
  std::exception_ptr error;

  auto worker = [&]() {
    detail::inside_parallel_region() = true;
    for (;;) {
      const Index i = next.fetch_add(1);
      if (i >= n) break;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
    detail::inside_parallel_region() = false;
  };

  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& thread : pool) thread.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace demix
