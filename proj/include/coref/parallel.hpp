#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace coref {

// Static block partition over [0, n). Workers write only to their own output
// slots, so results are identical for any thread count. threads <= 0 means
// hardware concurrency.
inline void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& f) {
  if (threads <= 0) threads = int(std::thread::hardware_concurrency());
  if (threads < 1) threads = 1;
  if (threads == 1 || n <= 1) {
    for (int64_t i = 0; i < n; ++i) f(i);
    return;
  }
  threads = int(std::min<int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(size_t(threads));
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (int64_t i = t; i < n; i += threads) f(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace coref
