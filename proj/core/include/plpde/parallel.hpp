#pragma once

#include <cstddef>
#include <functional>

namespace plpde {

/// Worker count used by data-parallel loops: hardware concurrency capped by
/// the PLPDE_THREADS environment variable (read once).
unsigned worker_count();

/// Splits [0, count) into contiguous chunks, one per worker, and runs
/// `body(begin, end)` on each. Chunk boundaries depend only on `count` and
/// worker_count(), never on timing; reductions belong to the caller.
void parallel_for(std::size_t count, const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace plpde
