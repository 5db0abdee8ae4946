#pragma once

#include <cstddef>
#include <functional>

namespace spedge {

// Worker count: SPEDGE_THREADS if set and positive, else the hardware
// concurrency. set_thread_override() takes precedence over both (0 clears).
int thread_count();
void set_thread_override(int n);

// Calls fn(i) for i in [0, n). Work is split into contiguous chunks; every
// index is processed exactly once, so results that depend only on i are
// identical for any thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace spedge
