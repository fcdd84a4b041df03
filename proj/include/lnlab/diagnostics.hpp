#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lnlab/matrix.hpp"
#include "lnlab/model.hpp"
#include "lnlab/numerics.hpp"

namespace lnlab {

struct BoundContext {
  std::size_t depth = 0;
  double delta_t = 1.0;
  double gamma_max = 0.0;
  double beta_max = 0.0;
  std::size_t nd = 0;
};

struct BoundReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  /// rhs − lhs
  double margin = 0.0;
  BoundContext context;

  bool holds(double slack = 0.0) const { return margin >= -slack; }
};

BoundReport make_report(std::string name, double lhs, double rhs, BoundContext ctx);

struct OutputExtrema {
  double gamma_max = 0.0;
  double beta_max = 0.0;
};

/// max |γ| and max |β| over the output-LN sites (attn_out, ffn_out) present in `params`.
OutputExtrema output_ln_extrema(const std::vector<BlockParams>& params);

/// Moments of X_0 … X_D.
std::vector<Moments> layer_moments(const ForwardTape& tape);

/// ‖X_{i+1} − X_i‖_F for i = 0 … D−1.
std::vector<double> layer_increments(const ForwardTape& tape);

/// Norm-equivalence constant between the entry-wise p-norm and the Frobenius
/// norm on ℝ^{nd}: (nd)^{|1/2 − 1/p|}, exactly 1 at p = 2.
double c_hat(double p, std::size_t nd);

/// [MA bound, Var bound] for a Peri tape. Throws DomainError for other placements.
std::vector<BoundReport> peri_growth_check(const ForwardTape& tape);

/// Population variance over samples of one terminal entry vs the sample mean of
/// (‖X_0‖_F + 2DΔt√(nd)(γ_max+β_max))². Needs ≥ 2 inputs.
BoundReport datawise_variance_check(std::span<const Matrix> inputs,
                                    const std::vector<BlockParams>& params,
                                    const ModelConfig& cfg, std::size_t row, std::size_t col);

/// ‖X_D^a − X_D^b‖_F vs ‖X_0^a − X_0^b‖_F + 4DΔt√(nd)γ_max (Peri only).
BoundReport pathwise_stability_check(const Matrix& x0a, const Matrix& x0b,
                                     const std::vector<BlockParams>& params,
                                     const ModelConfig& cfg);

/// W_p of the pushforwards vs 2^{(p−1)/p}(Ĉ(p)·W_p(μ0, ν0) + 4DΔt√(nd)γ_max) (Peri only).
BoundReport wasserstein_stability_check(std::span<const Matrix> mu0, std::span<const Matrix> nu0,
                                        const std::vector<BlockParams>& params,
                                        const ModelConfig& cfg, double p);

struct RescaleResult {
  /// max-abs entrywise change of the sublayer sensitivity.
  double max_abs_dev = 0.0;
  /// Least-squares s with (S_after − I) ≈ s·(S_before − I).
  double scale_ratio = 1.0;
  /// ‖(S_after − I) − s·(S_before − I)‖_F / ‖S_after − I‖_F (0 when both vanish).
  double fit_residual = 0.0;
};

/// Rescales (W, V) → (c1·W, c2·V) in every head, or (W1, W2) → (c1·W1, c2·W2),
/// and compares the sublayer sensitivity at the same sublayer input. Placement
/// must be Pre or Peri. With relu, any pre-activation sign change or exact
/// zero throws DifferentiabilityError.
RescaleResult rescale_invariance_test(const ForwardTape& tape, std::size_t block, double c1,
                                      double c2, Sublayer which);

/// MA(X_D) vs the product bound of the simplified chain.
BoundReport pre_exponential_bound(const PreChainResult& chain);

/// train_loss + L·(Ĉ(1)·r + 4DΔt√(nd)·γ_max). Negative L, r or γ_max throw.
double dro_bound(double train_loss, double lipschitz, double radius, std::size_t depth,
                 double delta_t, std::size_t nd, double gamma_max, double c_hat_1 = 1.0);

/// Central-difference Jacobian (rows = outputs) with h = 1e−6·(1+‖x‖∞).
Matrix fd_jacobian(const std::function<Vector(std::span<const double>)>& f,
                   std::span<const double> x);

struct GradcheckRow {
  std::size_t instance = 0;
  std::string target;
  std::string placement;
  double rel_err = 0.0;
};

/// Randomized analytic-vs-FD suite: LayerNorm and RMSNorm Jacobians, all
/// attention blocks, FFN Jacobian, block sensitivity and every parameter
/// gradient of ⟨U, X_D⟩. Dimensions are drawn with d ≤ 8, n ≤ 5, H ≤ 2,
/// D ≤ 4, tanh, ε = 1e−5, placements cycling Off/Pre/Peri/Post.
std::vector<GradcheckRow> gradient_check_suite(std::uint64_t seed, std::size_t instances,
                                               std::size_t threads);

}  // namespace lnlab
