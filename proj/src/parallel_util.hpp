#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace uag::detail {

// Runs fn(i) for i in [0, n). workers <= 1 stays on the calling thread;
// otherwise contiguous index chunks go to worker threads. The first exception
// (lowest chunk) is rethrown after all threads join.
inline void parallel_for(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t count = std::min(workers, n);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(count);
  const std::size_t chunk = (n + count - 1) / count;
  for (std::size_t t = 0; t < count; ++t) {
    threads.emplace_back([&, t] {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(n, begin + chunk);
      try {
        for (std::size_t i = begin; i < end; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : threads) th.join();
  for (auto& err : errors) {
    if (err) std::rethrow_exception(err);
  }
}

}  // namespace uag::detail
