#pragma once

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace homog {

/// Worker count for element-parallel loops: HOMOG_THREADS when set (>= 1),
/// otherwise the hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("HOMOG_THREADS")) {
    const int v = std::atoi(env);
    if (v >= 1) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs f(begin, end) over a partition of [0, n); serial when one worker.
template <class F>
void parallel_for_chunks(std::int64_t n, const F& f) {
  const int workers = worker_count();
  if (workers <= 1 || n < 512) {
    f(std::int64_t{0}, n);
    return;
  }
  const std::int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    const std::int64_t lo = t * chunk;
    const std::int64_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&f, lo, hi] { f(lo, hi); });
  }
  for (auto& th : pool) th.join();
}

}  // namespace homog
