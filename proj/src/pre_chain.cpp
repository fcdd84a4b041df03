#include <algorithm>
#include <cmath>

#include "lnlab/error.hpp"
#include "lnlab/model.hpp"
#include "lnlab/numerics.hpp"

namespace lnlab {

PreChainResult simplified_pre_chain(const Matrix& x0, std::span<const Matrix> weights,
                                    std::span<const Vector> gammas,
                                    std::span<const Matrix> queries, std::span<const Matrix> keys,
                                    double delta_t) {
  const std::size_t d = x0.rows();
  const std::size_t n = x0.cols();
  const std::size_t depth = weights.size();
  if (gammas.size() != depth)
    throw DimensionError("simplified_pre_chain: " + std::to_string(gammas.size()) +
                         " gammas for " + std::to_string(depth) + " layers");
  const bool uniform = queries.empty() && keys.empty();
  if (!uniform && (queries.size() != depth || keys.size() != depth))
    throw DimensionError("simplified_pre_chain: queries/keys must be empty or one per layer");
  if (!(delta_t > 0.0 && delta_t <= 1.0))
    throw DomainError("simplified_pre_chain: delta_t must lie in (0, 1]");

  PreChainResult r;
  r.states.reserve(depth + 1);
  r.states.push_back(x0);
  double product = 1.0;
  for (std::size_t i = 0; i < depth; ++i) {
    const Matrix& x = r.states.back();
    const Matrix& w = weights[i];
    const Vector& gamma = gammas[i];
    if (w.rows() != d || w.cols() != d)
      throw DimensionError("simplified_pre_chain: W_" + std::to_string(i) + " is " +
                           w.shape_string() + ", expected square of size d");
    if (gamma.size() != d) throw DimensionError("simplified_pre_chain: gamma length mismatch");

    Matrix normed(d, n);
    double max_inv_norm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double nrm = norm2(x.col(j));
      if (nrm == 0.0)
        throw DegenerateInputError("simplified_pre_chain: zero token " + std::to_string(j) +
                                       " at layer " + std::to_string(i),
                                   j, i, "rms");
      max_inv_norm = std::max(max_inv_norm, 1.0 / nrm);
      for (std::size_t a = 0; a < d; ++a) normed(a, j) = gamma[a] * x(a, j) / nrm;
    }

    Matrix attn;
    if (uniform) {
      attn = Matrix(n, n, 1.0 / static_cast<double>(n));
    } else {
      const double scale = 1.0 / std::sqrt(static_cast<double>(queries[i].rows()));
      Matrix scores = matmul(transpose(matmul(keys[i], normed)), matmul(queries[i], normed));
      scores *= scale;
      attn = softmax_columns(scores);
    }

    Matrix next = matmul(matmul(w, normed), attn);
    next *= delta_t;
    next += x;
    if (!all_finite(next))
      throw DivergenceError("simplified_pre_chain: non-finite state at layer " + std::to_string(i),
                            i);

    const double factor = 1.0 + delta_t * std::sqrt(static_cast<double>(n)) *
                                    norm_inf(gamma) * max_inv_norm * spectral_norm(w);
    r.factors.push_back(factor);
    product *= factor;
    r.states.push_back(std::move(next));
  }
  const double nd = static_cast<double>(n * d);
  double abs_sum = 0.0;
  for (double v : r.output().data()) abs_sum += std::abs(v);
  r.mean_abs = abs_sum / nd;
  r.bound_rhs = product * frobenius_norm(x0) / std::sqrt(nd);
  return r;
}

}  // namespace lnlab
