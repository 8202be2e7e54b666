#include "okcusum/threading.hpp"

#include <atomic>
#include <algorithm>
#include <cstdlib>
#include <thread>
#include <vector>

namespace okcusum {

int thread_count() {
  static const int n = [] {
    if (const char* env = std::getenv("KCPD_THREADS")) {
      const long v = std::strtol(env, nullptr, 10);
      if (v >= 1 && v <= 1024) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
  }();
  return n;
}

void parallel_chunks(std::int64_t n, int n_chunks,
                     const std::function<void(int, std::int64_t, std::int64_t)>& fn) {
  if (n <= 0) return;
  n_chunks = static_cast<int>(std::min<std::int64_t>(n_chunks, n));
  if (n_chunks < 1) n_chunks = 1;

  auto bounds = [&](int c) {
    const std::int64_t lo = n * c / n_chunks;
    const std::int64_t hi = n * (c + 1) / n_chunks;
    return std::pair<std::int64_t, std::int64_t>{lo, hi};
  };

  const int workers = std::min(thread_count(), n_chunks);
  if (workers <= 1) {
    for (int c = 0; c < n_chunks; ++c) {
      auto [lo, hi] = bounds(c);
      fn(c, lo, hi);
    }
    return;
  }

  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int c = next.fetch_add(1);
        if (c >= n_chunks || failed.load()) return;
        auto [lo, hi] = bounds(c);
        try {
          fn(c, lo, hi);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failed.load() && err) std::rethrow_exception(err);
}

}  // namespace okcusum
