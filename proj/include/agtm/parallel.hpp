#pragma once

#include <cstddef>
#include <functional>

namespace agtm {

/// Worker count from AGTM_THREADS, falling back to the hardware concurrency.
std::size_t worker_count();

/// Overrides the worker count for this process (0 restores the environment value).
void set_worker_count(std::size_t n);

/// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks write disjoint
/// outputs, so results do not depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace agtm
