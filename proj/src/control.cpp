#include "lnlab/control.hpp"

#include <cmath>
#include <string>

#include "lnlab/error.hpp"

namespace lnlab {

namespace {

double beta_at(const LNParams& p, std::size_t a) {
  return p.kind == NormKind::LayerNorm ? p.beta[a] : 0.0;
}

void check_site(std::size_t d, const LNParams& p) {
  if (p.gamma.size() != d || (p.kind == NormKind::LayerNorm && p.beta.size() != d))
    throw DimensionError("control: LN parameters do not match token length " + std::to_string(d));
  for (std::size_t a = 0; a < d; ++a)
    if (p.gamma[a] == 0.0) throw DomainError("control: gamma entry " + std::to_string(a) + " is zero");
}

}  // namespace

Matrix hamiltonian_maximizer(const Matrix& adjoint, std::span<const double> gamma,
                             std::span<const double> beta) {
  const std::size_t d = adjoint.rows();
  if (gamma.size() != d || beta.size() != d)
    throw DimensionError("hamiltonian_maximizer: gamma/beta length does not match d");
  for (std::size_t a = 0; a < d; ++a)
    if (gamma[a] == 0.0)
      throw DomainError("hamiltonian_maximizer: gamma entry " + std::to_string(a) + " is zero");
  const double sqrt_d = std::sqrt(static_cast<double>(d));
  Matrix f(d, adjoint.cols());
  for (std::size_t j = 0; j < adjoint.cols(); ++j) {
    const auto p = adjoint.col(j);
    Vector g2p(d);
    double quad = 0.0;
    for (std::size_t a = 0; a < d; ++a) {
      g2p[a] = gamma[a] * gamma[a] * p[a];
      quad += p[a] * g2p[a];
    }
    if (!(quad > 0.0))
      throw DomainError("hamiltonian_maximizer: adjoint column " + std::to_string(j) + " is zero");
    const double scale = sqrt_d / std::sqrt(quad);
    for (std::size_t a = 0; a < d; ++a) f(a, j) = -scale * g2p[a] + beta[a];
  }
  return f;
}

double hamiltonian_value(const Matrix& adjoint, const Matrix& f) { return -inner(adjoint, f); }

Vector postln_projection(std::span<const double> x, std::span<const double> f, const LNParams& p) {
  const std::size_t d = x.size();
  if (f.size() != d) throw DimensionError("postln_projection: x and f lengths differ");
  check_site(d, p);
  Vector u(d);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    u[a] = x[a] - beta_at(p, a);
    const double w = 1.0 / (p.gamma[a] * p.gamma[a]);
    num += u[a] * w * f[a];
    den += u[a] * w * u[a];
  }
  if (!(den > 0.0)) throw DomainError("postln_projection: x coincides with the ellipsoid center");
  const double c = num / den;
  Vector out(d);
  for (std::size_t a = 0; a < d; ++a) out[a] = f[a] - c * u[a];
  return out;
}

Vector reproject_to_ellipsoid(std::span<const double> x, const LNParams& p) {
  const std::size_t d = x.size();
  check_site(d, p);
  double q = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    const double s = (x[a] - beta_at(p, a)) / p.gamma[a];
    q += s * s;
  }
  if (!(q > 0.0)) throw DomainError("reproject_to_ellipsoid: point at the ellipsoid center");
  const double scale = std::sqrt(static_cast<double>(d) / q);
  Vector out(d);
  for (std::size_t a = 0; a < d; ++a) out[a] = beta_at(p, a) + scale * (x[a] - beta_at(p, a));
  return out;
}

Vector sample_ellipsoid(const LNParams& p, RngStream& rng) {
  const std::size_t d = p.dim();
  Vector z(d);
  double nrm2 = 0.0;
  do {
    nrm2 = 0.0;
    for (auto& v : z) {
      v = rng.normal();
      nrm2 += v * v;
    }
  } while (nrm2 == 0.0);
  const double scale = std::sqrt(static_cast<double>(d) / nrm2);
  Vector out(d);
  for (std::size_t a = 0; a < d; ++a) out[a] = p.gamma[a] * z[a] * scale + beta_at(p, a);
  return out;
}

std::vector<Vector> integrate_projected_flow(std::span<const double> x0, const TokenField& field,
                                             const LNParams& p, const FlowOptions& opts) {
  check_site(x0.size(), p);
  const double r0 = ellipsoid_residual(x0, p);
  if (!(std::abs(r0) <= 1e-9))
    throw DomainError("integrate_projected_flow: x0 is off the ellipsoid (residual " +
                      std::to_string(r0) + ")");
  std::vector<Vector> traj;
  traj.reserve(opts.steps + 1);
  traj.emplace_back(x0.begin(), x0.end());
  for (std::size_t s = 0; s < opts.steps; ++s) {
    const Vector& x = traj.back();
    const Vector f = field(x);
    if (f.size() != x.size() || !all_finite(f))
      throw NonFiniteError("integrate_projected_flow: field returned a non-finite value at step " +
                           std::to_string(s));
    const Vector v = postln_projection(x, f, p);
    Vector next(x.size());
    for (std::size_t a = 0; a < x.size(); ++a) next[a] = x[a] + opts.h * v[a];
    if (opts.reproject) next = reproject_to_ellipsoid(next, p);
    traj.push_back(std::move(next));
  }
  return traj;
}

}  // namespace lnlab
