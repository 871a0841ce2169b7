// sscpc - deterministic data parallelism.
//
// parallel_for splits an index range into contiguous chunks, one per worker.
// Callers write per-index slots and reduce sequentially afterwards, so
// results are identical for any thread count.

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace sscpc {

namespace detail {
inline int& thread_count_ref() {
  static int count = 0;  // 0 = use hardware concurrency
  return count;
}
}  // namespace detail

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

/// Caps worker count for subsequent parallel_for calls. 0 restores the
/// hardware default.
inline void set_thread_count(int n) { detail::thread_count_ref() = n; }

inline int thread_count() {
  const int n = detail::thread_count_ref();
  return n > 0 ? n : hardware_threads();
}

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(thread_count()), std::max<std::size_t>(n, 1));
  if (workers <= 1 || n < 2048) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] {
      for (std::size_t i = begin; i < end; ++i) fn(i);
    });
  }
  for (std::size_t i = 0; i < std::min(chunk, n); ++i) fn(i);
  for (auto& t : pool) t.join();
}

}  // namespace sscpc
