#pragma once

#include <cstddef>
#include <functional>

#include "lnlab/matrix.hpp"

namespace lnlab {

/// Column-wise softmax with per-column max subtraction. Throws NonFiniteError
/// on non-finite input.
Matrix softmax_columns(const Matrix& s);

struct Moments {
  double frob = 0.0;
  /// (1/nd)·Σ|x|
  double mean_abs = 0.0;
  /// Unbiased variance over all nd entries (divisor nd − 1).
  double var = 0.0;
};

/// Entry-wise moments of a hidden state. Requires at least two entries.
Moments moments(const Matrix& x);

/// Largest singular value via power iteration on WᵀW.
///
/// Iterates until the relative change of the estimate drops below `tol`;
/// throws ConvergenceError (carrying the last estimate) after `max_iter`.
double spectral_norm(const Matrix& w, double tol = 1e-13, std::size_t max_iter = 100000);

/// Worker count for parallel suites: LNLAB_THREADS if set and positive,
/// otherwise std::thread::hardware_concurrency().
std::size_t thread_budget();

/// Runs body(i) for i in [0, count) across up to `threads` workers. Each index
/// runs exactly once; callers write results into per-index slots so merged
/// output is independent of scheduling. The first exception is rethrown.
void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body);

}  // namespace lnlab
