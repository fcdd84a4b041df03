#include "lnlab/optimal_transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lnlab/error.hpp"

namespace lnlab {

Assignment solve_assignment(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (cost.cols() != n) throw DimensionError("solve_assignment: cost must be square, got " +
                                             cost.shape_string());
  if (!all_finite(cost)) throw NonFiniteError("solve_assignment: non-finite cost");
  Assignment result;
  if (n == 0) return result;

  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual source.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> row_of(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    row_of[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of[j0] = row_of[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  result.col_for_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) result.col_for_row[row_of[j] - 1] = j - 1;
  // Sum the original costs rather than trusting the potentials.
  for (std::size_t i = 0; i < n; ++i) result.total_cost += cost(i, result.col_for_row[i]);
  return result;
}

double entrywise_pnorm_pow(const Matrix& x, double p) {
  double s = 0.0;
  if (p == 2.0) {
    for (double v : x.data()) s += v * v;
  } else if (p == 1.0) {
    for (double v : x.data()) s += std::abs(v);
  } else {
    for (double v : x.data()) s += std::pow(std::abs(v), p);
  }
  return s;
}

double wasserstein_exact(std::span<const Matrix> a, std::span<const Matrix> b, double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) throw DomainError("wasserstein_exact: p must be >= 1");
  if (a.size() != b.size())
    throw DimensionError("wasserstein_exact: sample counts differ (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  const std::size_t n = a.size();
  if (n == 0) throw DomainError("wasserstein_exact: empty sample sets");
  if (n > kMaxTransportSamples)
    throw DomainError("wasserstein_exact: at most " + std::to_string(kMaxTransportSamples) +
                      " samples supported");
  const std::size_t rows = a[0].rows();
  const std::size_t cols = a[0].cols();
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i].rows() != rows || a[i].cols() != cols || b[i].rows() != rows || b[i].cols() != cols)
      throw DimensionError("wasserstein_exact: sample shapes differ");
  }
  Matrix cost(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) cost(i, j) = entrywise_pnorm_pow(a[i] - b[j], p);
  const Assignment plan = solve_assignment(cost);
  const double mean_cost = plan.total_cost / static_cast<double>(n);
  return std::pow(mean_cost, 1.0 / p);
}

}  // namespace lnlab
