#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mesoh {

/// Runs fn(begin, end) over contiguous chunks of [0, n) on up to `jobs` threads.
/// Callers must keep chunk results independent so outputs never depend on `jobs`.
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  if (n == 0) return;
  unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (workers == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> threads;
  threads.reserve(workers);
  std::size_t chunk = (n + workers - 1) / workers;
  for (unsigned t = 0; t < workers; ++t) {
    std::size_t b = t * chunk;
    std::size_t e = std::min(n, b + chunk);
    if (b >= e) break;
    threads.emplace_back([&fn, b, e] { fn(b, e); });
  }
  for (auto& th : threads) th.join();
}

/// Calls fn(block, begin, end) for fixed-size blocks of [0, n). Block
/// boundaries depend only on `block_size`, so per-block partial results
/// reduced in block order are identical for any thread count.
template <typename Fn>
void parallel_blocks(std::size_t n, std::size_t block_size, unsigned jobs, Fn&& fn) {
  std::size_t n_blocks = (n + block_size - 1) / block_size;
  parallel_for(n_blocks, jobs, [&](std::size_t b0, std::size_t b1) {
    for (std::size_t b = b0; b < b1; ++b) fn(b, b * block_size, std::min(n, (b + 1) * block_size));
  });
}

inline std::size_t block_count(std::size_t n, std::size_t block_size) { return (n + block_size - 1) / block_size; }

inline unsigned default_jobs() {
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

}  // namespace mesoh
