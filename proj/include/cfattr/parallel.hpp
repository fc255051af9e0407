#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace cfattr {

inline int hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : int(n);
}

// Runs fn(i) for i in [0, total). With threads > 1 the range is split into
// contiguous chunks; fn must only write to index-i slots so the result is
// identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t total, int threads, Fn&& fn) {
  if (threads <= 1 || total < 2) {
    for (std::size_t i = 0; i < total; ++i) fn(i);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(std::size_t(threads), total);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  const std::size_t chunk = (total + nw - 1) / nw;
  for (std::size_t w = 0; w < nw; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(total, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace cfattr
