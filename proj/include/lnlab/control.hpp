#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lnlab/matrix.hpp"
#include "lnlab/normalization.hpp"
#include "lnlab/rng.hpp"

namespace lnlab {

/// Column-wise maximizer of −⟨P, f⟩ over the ellipsoid {f : (f−β)ᵀΓ⁻²(f−β) = d}:
///   f*_j = −√d·Γ²p_j/√(p_jᵀΓ²p_j) + β.
/// Throws DomainError naming the first zero adjoint column.
Matrix hamiltonian_maximizer(const Matrix& adjoint, std::span<const double> gamma,
                             std::span<const double> beta);

/// −⟨P, F⟩ (Frobenius).
double hamiltonian_value(const Matrix& adjoint, const Matrix& f);

/// Removes the component of f along (x−β) in the Γ⁻² inner product. RMSNorm
/// sites use β = 0. Throws DomainError when x = β.
Vector postln_projection(std::span<const double> x, std::span<const double> f, const LNParams& p);

/// Pulls x back onto the ellipsoid by rescaling (x−β) radially.
Vector reproject_to_ellipsoid(std::span<const double> x, const LNParams& p);

/// Point on the ellipsoid: normal draw, mapped through Γ, rescaled to radius √d, shifted by β.
Vector sample_ellipsoid(const LNParams& p, RngStream& rng);

using TokenField = std::function<Vector(std::span<const double>)>;

struct FlowOptions {
  std::size_t steps = 100;
  double h = 1e-2;
  /// Radial re-projection after every step; disable to study raw Euler drift.
  bool reproject = true;
};

/// Projected Euler flow x ← x + h·postln_projection(x, field(x)). Returns
/// steps + 1 iterates including x0. x0 must lie on the ellipsoid to 1e−9.
std::vector<Vector> integrate_projected_flow(std::span<const double> x0, const TokenField& field,
                                             const LNParams& p, const FlowOptions& opts);

}  // namespace lnlab
