#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace mgeo {

// Runs body(0..n-1) on up to nthreads workers (0 = hardware count).  Work is
// handed out through a shared counter, so results must not depend on
// scheduling; the first exception is rethrown after all workers join.
inline void parallel_for(long n, const std::function<void(long)>& body,
                         int nthreads = 0) {
  if (n <= 0) return;
  if (nthreads <= 0)
    nthreads = static_cast<int>(
        std::max(1u, std::thread::hardware_concurrency()));
  nthreads = static_cast<int>(std::min<long>(nthreads, n));
  if (nthreads == 1) {
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<long> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const long i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace mgeo
