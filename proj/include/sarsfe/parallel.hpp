#pragma once

#include <cstddef>
#include <functional>

namespace sarsfe {

/// Worker count: SARSFE_THREADS when set, otherwise the hardware concurrency.
unsigned default_thread_count();

/// Process-wide cap used when a caller passes threads = 0.
void set_thread_count(unsigned threads);
unsigned thread_count();

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = thread_count()).
/// Work is split into contiguous index ranges; the first exception thrown is rethrown.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace sarsfe
