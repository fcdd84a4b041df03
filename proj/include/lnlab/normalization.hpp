#pragma once

#include <cstddef>
#include <span>

#include "lnlab/matrix.hpp"

namespace lnlab {

enum class NormKind { LayerNorm, RMSNorm };

/// Default smoothing constant added to the variance.
inline constexpr double kDefaultEpsilon = 1e-5;

/// Parameters of one normalization site. RMSNorm ignores `beta`.
struct LNParams {
  Vector gamma;
  Vector beta;
  double epsilon = kDefaultEpsilon;
  NormKind kind = NormKind::LayerNorm;

  /// γ = 𝟙, β = 0.
  static LNParams unit(std::size_t d, double epsilon = kDefaultEpsilon,
                       NormKind kind = NormKind::LayerNorm);
  std::size_t dim() const noexcept { return gamma.size(); }
};

/// LayerNorm: γ⊙(x−μ)/√(σ²+ε) + β. RMSNorm: γ⊙x/√(mean(x²)+ε).
/// `token` only labels a DegenerateInputError.
Vector ln_forward(std::span<const double> x, const LNParams& p, std::size_t token = 0);
/// Column-wise application to a d×n state.
Matrix ln_forward(const Matrix& x, const LNParams& p);

/// (z−β)ᵀΓ⁻²(z−β) − d for LayerNorm, zᵀΓ⁻²z − d for RMSNorm.
double ellipsoid_residual(std::span<const double> z, const LNParams& p);

/// J[a][b] = ∂out_a/∂x_b, the exact derivative of the ε-smoothed map.
Matrix ln_jacobian(std::span<const double> x, const LNParams& p, std::size_t token = 0);

/// Reverse-mode pass for one token: given dL/dout, returns dL/dx and
/// accumulates dL/dγ, dL/dβ into the supplied buffers (β ignored for RMSNorm).
Vector ln_backward(std::span<const double> x, std::span<const double> grad_out,
                   const LNParams& p, std::span<double> grad_gamma,
                   std::span<double> grad_beta);

}  // namespace lnlab
