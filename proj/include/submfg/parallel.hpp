#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace submfg {

inline int resolve_threads(int threads) {
  if (threads == 0) {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }
  return threads < 1 ? 1 : threads;
}

/// Runs fn(i) for i in [0, n), sharded over at most `threads` workers with a
/// static stride schedule.  Callers must write only to slots owned by index i
/// and do any cross-index reduction afterwards in index order; under that
/// contract results are identical for every thread count.  If several
/// indices throw, the exception of the smallest index is rethrown.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::min(resolve_threads(threads), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<int> error_index(threads, -1);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
          error_index[w] = i;
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  int first = -1;
  for (int w = 0; w < threads; ++w)
    if (error_index[w] >= 0 && (first < 0 || error_index[w] < error_index[first]))
      first = w;
  if (first >= 0) std::rethrow_exception(errors[first]);
}

}  // namespace submfg
