#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace lgcp {

inline int default_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

// Deterministic chunked parallel map: [begin,end) is split into fixed chunks
// independent of thread count, so per-chunk accumulation orders are stable.
// body(chunk_index, i_begin, i_end) must only touch chunk-owned state.
inline void parallel_chunks(long long begin, long long end, int n_threads,
                            const std::function<void(int, long long, long long)>& body) {
  const long long n = end - begin;
  if (n <= 0) return;
  n_threads = std::max(1, n_threads);
  const int n_chunks = static_cast<int>(std::min<long long>(n, 4LL * n_threads));
  const long long step = (n + n_chunks - 1) / n_chunks;
  if (n_threads == 1) {
    for (int c = 0; c < n_chunks; ++c) {
      const long long lo = begin + c * step;
      const long long hi = std::min(end, lo + step);
      if (lo < hi) body(c, lo, hi);
    }
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mu;
  std::atomic<int> next{0};
  for (int w = 0; w < n_threads; ++w) {
    pool.emplace_back([&] {
      for (int c = next.fetch_add(1); c < n_chunks; c = next.fetch_add(1)) {
        const long long lo = begin + static_cast<long long>(c) * step;
        const long long hi = std::min(end, lo + step);
        if (lo >= hi) continue;
        try {
          body(c, lo, hi);
        } catch (...) {
          std::lock_guard<std::mutex> g(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace lgcp
