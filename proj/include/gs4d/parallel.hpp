#pragma once

#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace gs4d {

// Thread count: explicit value, else GS4D_THREADS, else hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GS4D_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs fn(block_index, begin, end) over fixed-size blocks of [0, n).
// The block partition depends only on block_size, never on the thread count,
// so per-block outputs reduced in block order are bit-reproducible.
inline void parallel_for_blocks(size_t n, size_t block_size, int threads,
                                const std::function<void(size_t, size_t, size_t)>& fn) {
  if (n == 0) return;
  const size_t blocks = (n + block_size - 1) / block_size;
  const int nthreads = std::min<size_t>(resolve_threads(threads), blocks);
  if (nthreads <= 1) {
    for (size_t b = 0; b < blocks; ++b) {
      fn(b, b * block_size, std::min(n, (b + 1) * block_size));
    }
    return;
  }
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t b = next.fetch_add(1); b < blocks; b = next.fetch_add(1)) {
      fn(b, b * block_size, std::min(n, (b + 1) * block_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(nthreads);
  for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

inline size_t block_count(size_t n, size_t block_size) {
  return (n + block_size - 1) / block_size;
}

}  // namespace gs4d
