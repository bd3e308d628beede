#include "demix/parallel.hpp"

namespace demix {

namespace {
std::atomic<unsigned> configured_threads{0};
}

void set_thread_count(unsigned count) { configured_threads.store(count); }

unsigned thread_count() {
  const unsigned configured = configured_threads.load();
  if (configured > 0) return configured;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

namespace detail {
bool& inside_parallel_region() {
  thread_local bool flag = false;
  return flag;
}
}  // namespace detail

}  // namespace demix
