#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace airtp {

// Runs fn(0..n_tasks) on a bounded worker pool. Tasks own their RNG
// streams (derived from task index), so results do not depend on the
// scheduling order; callers collect outputs indexed by task.
inline void run_parallel(std::size_t n_tasks, const std::function<void(std::size_t)>& fn,
                         std::size_t max_workers = 0) {
  if (n_tasks == 0) return;
  std::size_t workers = max_workers ? max_workers : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = std::min(workers, n_tasks);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t idx = next.fetch_add(1);
        if (idx >= n_tasks) return;
        try {
          fn(idx);
        } catch (...) {
          std::lock_guard<std::mutex> lk(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace airtp
