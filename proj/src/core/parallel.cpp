#include "twz/core/parallel.hpp"

#include <cstdlib>
#include <string>

namespace twz {

namespace {
std::atomic<std::size_t> g_override{0};
} // namespace

std::size_t worker_count() {
  if (const std::size_t o = g_override.load(); o > 0) {
    return o;
  }
  if (const char* env = std::getenv("TWZ_WORKERS"); env != nullptr) {
    try {
      const long v = std::stol(env);
      if (v >= 1) {
        return static_cast<std::size_t>(v);
      }
    } catch (const std::exception&) {
      // fall through to the hardware default
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void set_worker_count(std::size_t n) { g_override.store(n); }

namespace detail {
bool& in_worker() noexcept {
  thread_local bool flag = false;
  return flag;
}
} // namespace detail

} // namespace twz
