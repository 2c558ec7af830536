#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace idsr {

// Runs fn(shard, begin, end) over contiguous static shards of [0, n).
// Shard boundaries depend only on (n, n_threads), so any reduction done in
// shard order is reproducible for a fixed thread count. n_threads <= 1 runs
// inline.
template <class Fn>
void parallel_shards(std::size_t n, int n_threads, Fn&& fn) {
  if (n == 0) return;
  if (n_threads <= 1 || n == 1) {
    fn(0, std::size_t{0}, n);
    return;
  }
  std::size_t shards = std::min<std::size_t>(static_cast<std::size_t>(n_threads), n);
  std::vector<std::thread> pool;
  pool.reserve(shards);
  std::size_t base = n / shards, rem = n % shards, begin = 0;
  for (std::size_t s = 0; s < shards; ++s) {
    std::size_t len = base + (s < rem ? 1 : 0);
    std::size_t end = begin + len;
    pool.emplace_back([&fn, s, begin, end] { fn(s, begin, end); });
    begin = end;
  }
  for (auto& t : pool) t.join();
}

}  // namespace idsr
