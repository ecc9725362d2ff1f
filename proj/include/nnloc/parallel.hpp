#pragma once

#include "nnloc/numerics.hpp"

#include <cstddef>

namespace nnloc {

/// Worker count used when a call does not pass one explicitly (0 = hardware concurrency).
void set_default_threads(int threads);
int default_threads();

/// Runs body(i) for i in [0, count) on up to `threads` workers. Results must not depend
/// on scheduling; the first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t count, FunctionRef<void(std::size_t)> body, int threads = 0);

} // namespace nnloc
