#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace twz {

/// Size of the worker pool: the override if set, else TWZ_WORKERS, else the
/// hardware concurrency. Always >= 1.
[[nodiscard]] std::size_t worker_count();

/// Overrides the worker count for this process (0 restores the default).
void set_worker_count(std::size_t n);

namespace detail {
bool& in_worker() noexcept;
} // namespace detail

/// Runs f(i) for i in [0, n). Tasks must not share mutable state; results are
/// collected by index so the outcome never depends on scheduling. Nested
/// calls from inside a worker run inline.
template <typename F> void parallel_for(std::size_t n, F&& f) {
  const std::size_t workers = std::min(worker_count(), n);
  if (workers <= 1 || detail::in_worker()) {
    for (std::size_t i = 0; i < n; ++i) {
      f(i);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto body = [&] {
    detail::in_worker() = true;
    for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        f(i);
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) {
          error = std::current_exception();
        }
      }
    }
    detail::in_worker() = false;
  };
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers - 1);
    for (std::size_t t = 1; t < workers; ++t) {
      threads.emplace_back(body);
    }
    body();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

} // namespace twz
