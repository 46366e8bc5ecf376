#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace ctp {

// Static-partition parallel loop. Chunk boundaries depend only on (n, threads)
// so results and floating-point reductions stay deterministic for a fixed
// thread count.
inline void parallel_for(int n, int threads,
                         const std::function<void(int begin, int end, int worker)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    if (n > 0) fn(0, n, 0);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const int chunk = (n + threads - 1) / threads;
  for (int w = 0; w < threads; ++w) {
    const int begin = w * chunk;
    const int end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(fn, begin, end, w);
  }
  for (auto& t : pool) t.join();
}

inline int hardware_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace ctp
