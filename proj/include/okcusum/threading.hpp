#pragma once

#include <cstdint>
#include <functional>

namespace okcusum {

/// Worker budget: KCPD_THREADS env var when set, hardware concurrency otherwise.
int thread_count();

/// Runs fn(chunk_index, begin, end) over [0, n) split into a fixed number of
/// chunks. Chunk boundaries depend only on (n, n_chunks), never on the thread
/// count, so per-chunk results can be combined deterministically.
void parallel_chunks(std::int64_t n, int n_chunks,
                     const std::function<void(int, std::int64_t, std::int64_t)>& fn);

}  // namespace okcusum
