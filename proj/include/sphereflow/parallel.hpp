#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sphereflow {

/// Number of worker threads used by parallel_for. Defaults to 1.
void set_thread_count(int threads);
int thread_count();

/// Runs body(lo, hi) over a partition of [0, count). Chunk boundaries depend
/// only on count and grain, never on the thread count.
void parallel_for(std::size_t count, std::size_t grain,
                  const std::function<void(std::size_t, std::size_t)>& body);

/// Pairwise (tree) summation; the result depends only on the input order.
double pairwise_sum(std::span<const double> values);

/// Sums term(i) for i in [0, count) with fixed blocking plus a pairwise tree
/// over block partials, so the result is bit-identical for any thread count.
double deterministic_sum(std::size_t count,
                         const std::function<double(std::size_t)>& term);

}  // namespace sphereflow
