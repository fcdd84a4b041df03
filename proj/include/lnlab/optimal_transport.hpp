#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lnlab/matrix.hpp"

namespace lnlab {

/// Largest sample count accepted by the exact solvers.
inline constexpr std::size_t kMaxTransportSamples = 256;

struct Assignment {
  /// col_for_row[i] = column assigned to row i.
  std::vector<std::size_t> col_for_row;
  double total_cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row/column potentials, O(N³)).
Assignment solve_assignment(const Matrix& cost);

/// Entry-wise p-norm ‖X‖_p = (Σ|x_ij|^p)^{1/p}, raised to the p-th power.
double entrywise_pnorm_pow(const Matrix& x, double p);

/// Exact p-Wasserstein distance between two uniform empirical measures with
/// the same number of atoms, ground cost ‖A_i − B_j‖_p^p (entry-wise p-norm).
double wasserstein_exact(std::span<const Matrix> a, std::span<const Matrix> b, double p);

}  // namespace lnlab
