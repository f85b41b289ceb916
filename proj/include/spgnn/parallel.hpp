#ifndef SPGNN_PARALLEL_HPP
#define SPGNN_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace spgnn {

// Global worker count. 0 means hardware concurrency. Results never depend
// on the value: every parallel_for body writes disjoint output slots and
// merges happen in index order on the caller side.
void set_num_threads(int n);
int num_threads();

// Runs fn(i) for i in [0, n). Falls back to a serial loop when only one
// worker is configured or when already inside a worker (no nesting).
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace spgnn

#endif
