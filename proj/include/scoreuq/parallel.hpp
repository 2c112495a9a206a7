#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace scoreuq {

/// Number of workers to use: `requested` if > 0, else SCOREUQ_THREADS, else
/// the hardware thread count.
int resolve_thread_count(int requested);

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Work items must be
/// independent and write only to their own output slots; the first exception
/// thrown by any item is rethrown on the calling thread.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& fn);

/// Sum with a fixed pairwise reduction tree. The tree depends only on v.size(),
/// so results are identical no matter how the inputs were produced.
double pairwise_sum(std::span<const double> v);

}  // namespace scoreuq
