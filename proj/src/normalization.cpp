#include "lnlab/normalization.hpp"

#include <cmath>
#include <string>

#include "lnlab/error.hpp"

namespace lnlab {

namespace {

// Centered input and the smoothed scale for one token.
struct TokenStats {
  Vector centered;  // x − μ (LayerNorm) or x (RMSNorm)
  double scale = 0.0;  // √(σ²+ε) or √(mean(x²)+ε)
};

void check_params(std::size_t d, const LNParams& p) {
  if (p.gamma.size() != d)
    throw DimensionError("normalization: gamma has length " + std::to_string(p.gamma.size()) +
                         ", token has length " + std::to_string(d));
  if (p.kind == NormKind::LayerNorm && p.beta.size() != d)
    throw DimensionError("normalization: beta has length " + std::to_string(p.beta.size()) +
                         ", token has length " + std::to_string(d));
  if (!(p.epsilon >= 0.0)) throw DomainError("normalization: epsilon must be >= 0");
}

TokenStats token_stats(std::span<const double> x, const LNParams& p, std::size_t token) {
  const std::size_t d = x.size();
  check_params(d, p);
  TokenStats s;
  s.centered.assign(x.begin(), x.end());
  double second_moment = 0.0;
  if (p.kind == NormKind::LayerNorm) {
    if (d < 2) throw DomainError("LayerNorm: token dimension must be >= 2");
    double mu = 0.0;
    for (double v : x) mu += v;
    mu /= static_cast<double>(d);
    for (double& v : s.centered) v -= mu;
  }
  for (double v : s.centered) second_moment += v * v;
  second_moment /= static_cast<double>(d);
  if (p.epsilon == 0.0 && second_moment == 0.0) {
    const char* what = p.kind == NormKind::LayerNorm ? "constant" : "zero";
    throw DegenerateInputError("normalization: " + std::string(what) + " token " +
                                   std::to_string(token) + " with epsilon = 0",
                               token);
  }
  s.scale = std::sqrt(second_moment + p.epsilon);
  return s;
}

}  // namespace

LNParams LNParams::unit(std::size_t d, double epsilon, NormKind kind) {
  return LNParams{Vector(d, 1.0), Vector(d, 0.0), epsilon, kind};
}

Vector ln_forward(std::span<const double> x, const LNParams& p, std::size_t token) {
  const TokenStats s = token_stats(x, p, token);
  Vector out(x.size());
  for (std::size_t a = 0; a < x.size(); ++a) {
    out[a] = p.gamma[a] * (s.centered[a] / s.scale);
    if (p.kind == NormKind::LayerNorm) out[a] += p.beta[a];
  }
  return out;
}

Matrix ln_forward(const Matrix& x, const LNParams& p) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) out.set_col(j, ln_forward(x.col(j), p, j));
  return out;
}

double ellipsoid_residual(std::span<const double> z, const LNParams& p) {
  check_params(z.size(), p);
  double q = 0.0;
  for (std::size_t a = 0; a < z.size(); ++a) {
    if (p.gamma[a] == 0.0)
      throw DomainError("ellipsoid_residual: gamma entry " + std::to_string(a) + " is zero");
    const double shifted = p.kind == NormKind::LayerNorm ? z[a] - p.beta[a] : z[a];
    const double scaled = shifted / p.gamma[a];
    q += scaled * scaled;
  }
  return q - static_cast<double>(z.size());
}

Matrix ln_jacobian(std::span<const double> x, const LNParams& p, std::size_t token) {
  const TokenStats s = token_stats(x, p, token);
  const std::size_t d = x.size();
  const double dd = static_cast<double>(d);
  const double inv = 1.0 / s.scale;
  const double inv3 = inv * inv * inv / dd;
  const double mean_term = p.kind == NormKind::LayerNorm ? inv / dd : 0.0;
  Matrix j(d, d);
  for (std::size_t b = 0; b < d; ++b) {
    for (std::size_t a = 0; a < d; ++a) {
      double v = -mean_term - s.centered[a] * s.centered[b] * inv3;
      if (a == b) v += inv;
      j(a, b) = p.gamma[a] * v;
    }
  }
  return j;
}

Vector ln_backward(std::span<const double> x, std::span<const double> grad_out,
                   const LNParams& p, std::span<double> grad_gamma,
                   std::span<double> grad_beta) {
  const TokenStats s = token_stats(x, p, 0);
  const std::size_t d = x.size();
  const double dd = static_cast<double>(d);
  if (grad_out.size() != d) throw DimensionError("ln_backward: gradient length mismatch");
  Vector gg(d);
  double gg_mean = 0.0;
  double gg_dot_c = 0.0;
  for (std::size_t a = 0; a < d; ++a) {
    gg[a] = grad_out[a] * p.gamma[a];
    gg_mean += gg[a];
    gg_dot_c += gg[a] * s.centered[a];
    if (!grad_gamma.empty()) grad_gamma[a] += grad_out[a] * s.centered[a] / s.scale;
    if (!grad_beta.empty() && p.kind == NormKind::LayerNorm) grad_beta[a] += grad_out[a];
  }
  gg_mean /= dd;
  const double inv = 1.0 / s.scale;
  const double inv3 = inv * inv * inv / dd;
  Vector dx(d);
  for (std::size_t b = 0; b < d; ++b) {
    dx[b] = gg[b] * inv - s.centered[b] * gg_dot_c * inv3;
    if (p.kind == NormKind::LayerNorm) dx[b] -= gg_mean * inv;
  }
  return dx;
}

}  // namespace lnlab
