#include "lnlab/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "lnlab/error.hpp"
#include "lnlab/optimal_transport.hpp"
#include "lnlab/rng.hpp"

namespace lnlab {

BoundReport make_report(std::string name, double lhs, double rhs, BoundContext ctx) {
  return BoundReport{std::move(name), lhs, rhs, rhs - lhs, ctx};
}

OutputExtrema output_ln_extrema(const std::vector<BlockParams>& params) {
  OutputExtrema e;
  for (const auto& b : params) {
    for (const auto* site : {&b.attn_out, &b.ffn_out}) {
      if (!site->has_value()) continue;
      const LNParams& p = **site;
      e.gamma_max = std::max(e.gamma_max, norm_inf(p.gamma));
      if (p.kind == NormKind::LayerNorm) e.beta_max = std::max(e.beta_max, norm_inf(p.beta));
    }
  }
  return e;
}

std::vector<Moments> layer_moments(const ForwardTape& tape) {
  std::vector<Moments> out;
  out.reserve(tape.states.size());
  for (const auto& x : tape.states) out.push_back(moments(x));
  return out;
}

std::vector<double> layer_increments(const ForwardTape& tape) {
  std::vector<double> out;
  for (std::size_t i = 0; i + 1 < tape.states.size(); ++i)
    out.push_back(frobenius_norm(tape.states[i + 1] - tape.states[i]));
  return out;
}

double c_hat(double p, std::size_t nd) {
  if (!(p >= 1.0)) throw DomainError("c_hat: p must be >= 1");
  if (p == 2.0) return 1.0;
  return std::pow(static_cast<double>(nd), std::abs(0.5 - 1.0 / p));
}

namespace {

void require_peri(const ModelConfig& cfg, const char* what) {
  if (cfg.placement != Placement::Peri)
    throw DomainError(std::string(what) + ": requires the peri placement, got " +
                      to_string(cfg.placement));
}

BoundContext context_for(const std::vector<BlockParams>& params, const ModelConfig& cfg) {
  const OutputExtrema e = output_ln_extrema(params);
  return {cfg.depth, cfg.delta_t, e.gamma_max, e.beta_max, cfg.d * cfg.n};
}

// 2DΔt√(nd)(γ_max+β_max): the total Frobenius budget of all output-LN increments.
double growth_budget(const BoundContext& c) {
  return 2.0 * static_cast<double>(c.depth) * c.delta_t * std::sqrt(static_cast<double>(c.nd)) *
         (c.gamma_max + c.beta_max);
}

double pathwise_budget(const BoundContext& c) {
  return 4.0 * static_cast<double>(c.depth) * c.delta_t * std::sqrt(static_cast<double>(c.nd)) *
         c.gamma_max;
}

}  // namespace

std::vector<BoundReport> peri_growth_check(const ForwardTape& tape) {
  require_peri(tape.cfg, "peri_growth_check");
  const BoundContext ctx = context_for(tape.params, tape.cfg);
  const double nd = static_cast<double>(ctx.nd);
  const double x0 = frobenius_norm(tape.states.front());
  const Moments m = moments(tape.output());
  const double ma_rhs = x0 / std::sqrt(nd) + growth_budget(ctx) / std::sqrt(nd);
  const double radius = x0 + growth_budget(ctx);
  const double var_rhs = radius * radius / (nd - 1.0);
  return {make_report("peri_ma", m.mean_abs, ma_rhs, ctx),
          make_report("peri_var", m.var, var_rhs, ctx)};
}

BoundReport datawise_variance_check(std::span<const Matrix> inputs,
                                    const std::vector<BlockParams>& params,
                                    const ModelConfig& cfg, std::size_t row, std::size_t col) {
  require_peri(cfg, "datawise_variance_check");
  if (inputs.size() < 2) throw DomainError("datawise_variance_check: needs at least 2 inputs");
  if (row >= cfg.d || col >= cfg.n) throw DomainError("datawise_variance_check: entry out of range");
  const BoundContext ctx = context_for(params, cfg);
  const double budget = growth_budget(ctx);
  const double count = static_cast<double>(inputs.size());
  double mean = 0.0;
  double rhs = 0.0;
  std::vector<double> values;
  values.reserve(inputs.size());
  for (const auto& x0 : inputs) {
    const ForwardTape tape = model_forward(x0, params, cfg);
    values.push_back(tape.output()(row, col));
    mean += values.back();
    const double r = frobenius_norm(x0) + budget;
    rhs += r * r;
  }
  mean /= count;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= count;
  return make_report("datawise_var", var, rhs / count, ctx);
}

BoundReport pathwise_stability_check(const Matrix& x0a, const Matrix& x0b,
                                     const std::vector<BlockParams>& params,
                                     const ModelConfig& cfg) {
  require_peri(cfg, "pathwise_stability_check");
  const BoundContext ctx = context_for(params, cfg);
  const Matrix ya = model_forward(x0a, params, cfg).output();
  const Matrix yb = model_forward(x0b, params, cfg).output();
  const double lhs = frobenius_norm(ya - yb);
  const double rhs = frobenius_norm(x0a - x0b) + pathwise_budget(ctx);
  return make_report("pathwise", lhs, rhs, ctx);
}

BoundReport wasserstein_stability_check(std::span<const Matrix> mu0, std::span<const Matrix> nu0,
                                        const std::vector<BlockParams>& params,
                                        const ModelConfig& cfg, double p) {
  require_peri(cfg, "wasserstein_stability_check");
  const BoundContext ctx = context_for(params, cfg);
  std::vector<Matrix> mu_d;
  std::vector<Matrix> nu_d;
  for (const auto& x : mu0) mu_d.push_back(model_forward(x, params, cfg).output());
  for (const auto& x : nu0) nu_d.push_back(model_forward(x, params, cfg).output());
  const double lhs = wasserstein_exact(mu_d, nu_d, p);
  const double w0 = wasserstein_exact(mu0, nu0, p);
  const double rhs = std::pow(2.0, (p - 1.0) / p) * (c_hat(p, ctx.nd) * w0 + pathwise_budget(ctx));
  return make_report("wasserstein", lhs, rhs, ctx);
}

namespace {

void check_relu_pattern(const Matrix& before, const Matrix& after) {
  for (std::size_t e = 0; e < before.size(); ++e) {
    const double a = before.data()[e];
    const double b = after.data()[e];
    if (a == 0.0 || b == 0.0 || (a > 0.0) != (b > 0.0))
      throw DifferentiabilityError(
          "rescale_invariance_test: relu activation pattern changes under rescaling; use tanh");
  }
}

}  // namespace

RescaleResult rescale_invariance_test(const ForwardTape& tape, std::size_t block, double c1,
                                      double c2, Sublayer which) {
  const ModelConfig& cfg = tape.cfg;
  if (cfg.placement != Placement::Pre && cfg.placement != Placement::Peri)
    throw DomainError("rescale_invariance_test: placement must be pre or peri");
  if (block >= tape.depth()) throw DomainError("rescale_invariance_test: block out of range");
  const BlockParams& b = tape.params[block];
  const SublayerTape& before = which == Sublayer::Attention ? tape.blocks[block].attn
                                                            : tape.blocks[block].ffn;
  BlockParams scaled = b;
  if (which == Sublayer::Attention) {
    for (auto& h : scaled.attn.heads) {
      h.out *= c1;
      h.value *= c2;
    }
  } else {
    scaled.ffn.w1 *= c1;
    scaled.ffn.w2 *= c2;
  }
  const SublayerTape after = sublayer_forward(before.input, scaled, cfg, which, block);
  if (which == Sublayer::Ffn && b.ffn.activation == Activation::Relu)
    check_relu_pattern(matmul(b.ffn.w1, before.normed_in), matmul(scaled.ffn.w1, after.normed_in));

  Matrix s0 = sublayer_sensitivity(before, b, cfg, which);
  Matrix s1 = sublayer_sensitivity(after, scaled, cfg, which);
  RescaleResult r;
  r.max_abs_dev = max_abs_diff(s0, s1);
  for (std::size_t i = 0; i < s0.rows(); ++i) {
    s0(i, i) -= 1.0;
    s1(i, i) -= 1.0;
  }
  const double denom = inner(s0, s0);
  r.scale_ratio = denom > 0.0 ? inner(s0, s1) / denom : 1.0;
  Matrix resid = s1;
  resid -= r.scale_ratio * s0;
  const double n1 = frobenius_norm(s1);
  r.fit_residual = n1 > 0.0 ? frobenius_norm(resid) / n1 : 0.0;
  return r;
}

BoundReport pre_exponential_bound(const PreChainResult& chain) {
  const Matrix& x0 = chain.states.front();
  BoundContext ctx;
  ctx.depth = chain.factors.size();
  ctx.nd = x0.size();
  return make_report("pre_chain_ma", chain.mean_abs, chain.bound_rhs, ctx);
}

double dro_bound(double train_loss, double lipschitz, double radius, std::size_t depth,
                 double delta_t, std::size_t nd, double gamma_max, double c_hat_1) {
  if (lipschitz < 0.0 || radius < 0.0 || gamma_max < 0.0 || c_hat_1 < 0.0 || delta_t < 0.0)
    throw DomainError("dro_bound: L, r, gamma_max, delta_t and C_hat must be nonnegative");
  return train_loss + lipschitz * (c_hat_1 * radius + 4.0 * static_cast<double>(depth) * delta_t *
                                                          std::sqrt(static_cast<double>(nd)) *
                                                          gamma_max);
}

Matrix fd_jacobian(const std::function<Vector(std::span<const double>)>& f,
                   std::span<const double> x) {
  const double h = 1e-6 * (1.0 + norm_inf(x));
  Vector probe(x.begin(), x.end());
  Matrix jac;
  for (std::size_t c = 0; c < x.size(); ++c) {
    probe[c] = x[c] + h;
    const Vector plus = f(probe);
    probe[c] = x[c] - h;
    const Vector minus = f(probe);
    probe[c] = x[c];
    if (jac.empty()) jac = Matrix(plus.size(), x.size());
    for (std::size_t r = 0; r < plus.size(); ++r) jac(r, c) = (plus[r] - minus[r]) / (2.0 * h);
  }
  return jac;
}

namespace {

Vector to_vector(const Matrix& m) { return Vector(m.data().begin(), m.data().end()); }

Matrix from_vec(std::span<const double> v, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  std::copy(v.begin(), v.end(), m.data().begin());
  return m;
}

LNParams random_site(std::size_t d, double eps, NormKind kind, RngStream& rng) {
  LNParams p = LNParams::unit(d, eps, kind);
  for (auto& g : p.gamma) g = 1.0 + 0.3 * rng.normal();
  if (kind == NormKind::LayerNorm)
    for (auto& b : p.beta) b = 0.3 * rng.normal();
  return p;
}

std::vector<GradcheckRow> gradcheck_instance(std::uint64_t seed, std::size_t instance) {
  RngStream rng(seed, instance);
  ModelConfig cfg;
  cfg.d = 3 + rng.next_u64() % 6;
  cfg.n = 1 + rng.next_u64() % 5;
  cfg.heads = 1 + rng.next_u64() % 2;
  cfg.k = 1 + rng.next_u64() % 4;
  cfg.m = 1 + rng.next_u64() % 8;
  cfg.depth = 1 + rng.next_u64() % 4;
  cfg.delta_t = instance % 3 == 0 ? 0.5 : 1.0;
  cfg.activation = Activation::Tanh;
  cfg.epsilon = 1e-5;
  static constexpr Placement kCycle[] = {Placement::Off, Placement::Pre, Placement::Peri,
                                         Placement::Post};
  cfg.placement = kCycle[instance % 4];
  const std::string placement = to_string(cfg.placement);
  std::vector<GradcheckRow> rows;
  auto add = [&](const std::string& target, const Matrix& analytic, const Matrix& fd) {
    rows.push_back({instance, target, placement, relative_error(analytic, fd)});
  };

  for (NormKind kind : {NormKind::LayerNorm, NormKind::RMSNorm}) {
    const LNParams p = random_site(cfg.d, cfg.epsilon, kind, rng);
    const Vector x = random_normal_vector(cfg.d, 1.0, rng);
    add(kind == NormKind::LayerNorm ? "layernorm_jacobian" : "rmsnorm_jacobian",
        ln_jacobian(x, p),
        fd_jacobian([&](std::span<const double> v) { return ln_forward(v, p); }, x));
  }

  std::vector<BlockParams> params = init_model(cfg, rng);
  for (auto& b : params)
    for (LnSite s : {LnSite::AttnIn, LnSite::AttnOut, LnSite::FfnIn, LnSite::FfnOut})
      if (b.site(s)) b.site(s) = random_site(cfg.d, cfg.epsilon, cfg.norm_kind, rng);
  const Matrix x0 = random_normal(cfg.d, cfg.n, 1.0, rng);
  const Matrix upstream = random_normal(cfg.d, cfg.n, 1.0, rng);
  const BlockParams& b0 = params.front();

  add("attention_jacobian", attn_jacobian_full(x0, b0.attn),
      fd_jacobian([&](std::span<const double> v) {
        return to_vector(attn_forward(from_vec(v, cfg.d, cfg.n), b0.attn));
      }, x0.data()));

  {
    Matrix analytic(cfg.n * cfg.d, cfg.n * cfg.d);
    for (std::size_t j = 0; j < cfg.n; ++j) {
      const Matrix blk = ffn_jacobian(x0, b0.ffn, j);
      for (std::size_t c = 0; c < cfg.d; ++c)
        for (std::size_t r = 0; r < cfg.d; ++r) analytic(j * cfg.d + r, j * cfg.d + c) = blk(r, c);
    }
    add("ffn_jacobian", analytic, fd_jacobian([&](std::span<const double> v) {
          return to_vector(ffn_forward(from_vec(v, cfg.d, cfg.n), b0.ffn));
        }, x0.data()));
  }

  const ForwardTape tape = model_forward(x0, params, cfg);
  add("block_sensitivity", local_sensitivity(tape, 0),
      fd_jacobian([&](std::span<const double> v) {
        return to_vector(block_forward(from_vec(v, cfg.d, cfg.n), b0, cfg).first);
      }, x0.data()));

  const ModelGradients grads = param_gradients(tape, upstream);
  Vector analytic;
  Vector numeric;
  std::vector<BlockParams> probe = params;
  for (std::size_t i = 0; i < params.size(); ++i) {
    BlockParams g = grads.blocks[i];
    auto g_tensors = param_tensors(g);
    auto p_tensors = param_tensors(probe[i]);
    for (std::size_t t = 0; t < p_tensors.size(); ++t) {
      auto values = p_tensors[t].values;
      const double h = 1e-6 * (1.0 + norm_inf(values));
      for (std::size_t e = 0; e < values.size(); ++e) {
        const double keep = values[e];
        values[e] = keep + h;
        const double up = inner(upstream, model_forward(x0, probe, cfg).output());
        values[e] = keep - h;
        const double down = inner(upstream, model_forward(x0, probe, cfg).output());
        values[e] = keep;
        numeric.push_back((up - down) / (2.0 * h));
        analytic.push_back(g_tensors[t].values[e]);
      }
    }
  }
  add("param_gradients", Matrix::column(analytic), Matrix::column(numeric));
  return rows;
}

}  // namespace

std::vector<GradcheckRow> gradient_check_suite(std::uint64_t seed, std::size_t instances,
                                               std::size_t threads) {
  std::vector<std::vector<GradcheckRow>> per(instances);
  parallel_for(instances, threads, [&](std::size_t i) { per[i] = gradcheck_instance(seed, i); });
  std::vector<GradcheckRow> rows;
  for (auto& v : per) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

}  // namespace lnlab
