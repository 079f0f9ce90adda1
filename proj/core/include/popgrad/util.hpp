#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace popgrad {

// Pairwise (cascade) summation. Fixed reduction order, independent of any
// parallel scheduling of the producers.
double pairwise_sum(std::span<const double> xs);

// sin(x) - x*cos(x), evaluated without cancellation near x = 0.
// Direct evaluation loses all significant digits for small x (both terms
// ~x agree to O(x^3)); the series x^3/3 - x^5/30 + x^7/840 - ... is exact
// to machine precision for x < 0.5.
double sin_minus_x_cos(double x);

// Shortest round-trip decimal representation of a double (std::to_chars).
std::string format_double(double x);

// Worker count for parallel sections: POPGRAD_THREADS env var if set,
// otherwise hardware concurrency, at least 1.
int worker_count();

// Runs fn(block_index) for block_index in [0, n_blocks) on up to
// max_threads workers. Blocks are claimed atomically; fn must only write
// to per-block state so results are independent of scheduling.
void parallel_blocks(std::int64_t n_blocks, int max_threads,
                     const std::function<void(std::int64_t)>& fn);

}  // namespace popgrad
