#pragma once

#include <cstddef>
#include <functional>

namespace lgv {

// 0 means: LGVLAB_THREADS if set, else hardware concurrency.
void set_thread_count(int n);
int thread_count();

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunk boundaries depend only on n and
// the thread count, and every index is written by exactly one chunk, so callers that write
// results by index obtain schedule-independent output.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace lgv
