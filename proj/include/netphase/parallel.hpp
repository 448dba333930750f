#pragma once

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace netphase {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Runs fn(block_index) for every block in [0, blocks). Blocks are claimed
// dynamically by a thread pool, but per-block output must go to slots keyed
// by the block index, so the result is independent of the thread count.
template <typename Fn>
inline void parallel_blocks(long long blocks, int threads, Fn&& fn) {
  if (blocks <= 0) return;
  long long nt = std::min<long long>(resolve_threads(threads), blocks);
  if (nt <= 1) {
    for (long long b = 0; b < blocks; ++b) fn(b);
    return;
  }
  std::atomic<long long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(nt));
  for (long long t = 0; t < nt; ++t) {
    pool.emplace_back([&] {
      for (long long b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) fn(b);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace netphase
