#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace splitcem {

/// Runs fn(i) for i in [0, n) on up to `threads` workers with a static
/// interleaved schedule. The first exception (lowest task index) is rethrown
/// after all workers join. Callers write results into per-index slots, so the
/// outcome does not depend on the thread count.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  const int workers = std::clamp(threads, 1, std::max(1, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace splitcem
