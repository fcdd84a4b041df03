// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Every criterion also returns a fingerprint of the numbers it measured;
// criterion 13 reruns 1-12 and requires identical fingerprints.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "lnlab/config.hpp"
#include "lnlab/control.hpp"
#include "lnlab/diagnostics.hpp"
#include "lnlab/optimal_transport.hpp"
#include "lnlab/training.hpp"
#include "support/oracles.hpp"

using namespace lnlab;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::string fingerprint;
};

// Accumulates every measured number so two runs can be compared exactly.
class Trace {
 public:
  void add(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g;", v);
    text_ += buf;
  }
  void add(std::size_t v) { text_ += std::to_string(v) + ";"; }
  std::string digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text_) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  std::string text_;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

ModelConfig peri_config(std::size_t depth, double dt, double eps = 1e-5) {
  ModelConfig cfg;
  cfg.depth = depth;
  cfg.delta_t = dt;
  cfg.epsilon = eps;
  cfg.placement = Placement::Peri;
  return cfg;
}

// Init weights plus non-unit γ/β on every site so γ_max and β_max vary.
std::vector<BlockParams> random_peri(const ModelConfig& cfg, RngStream& rng) {
  auto params = init_model(cfg, rng);
  for (auto& b : params) {
    for (LnSite s : {LnSite::AttnIn, LnSite::AttnOut, LnSite::FfnIn, LnSite::FfnOut}) {
      auto& site = b.site(s);
      if (!site) continue;
      for (double& g : site->gamma) g = rng.uniform(0.2, 1.5);
      for (double& v : site->beta) v = rng.uniform(-0.5, 0.5);
    }
  }
  return params;
}

LNParams random_site(std::size_t d, double eps, NormKind kind, RngStream& rng) {
  LNParams p = LNParams::unit(d, eps, kind);
  for (auto& g : p.gamma) g = rng.uniform(0.3, 2.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
  for (auto& b : p.beta) b = rng.normal();
  return p;
}

Outcome c1_gradients() {
  Trace tr;
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = gradient_check_suite(0, 100, 1);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::size_t instances = 0;
  for (const auto& r : rows) {
    worst = std::max(worst, r.rel_err);
    instances = std::max(instances, r.instance + 1);
    tr.add(r.rel_err);
  }
  Outcome o;
  o.pass = worst <= 1e-6 && instances >= 100 && secs <= 120.0;
  o.detail = "max rel err " + fmt("%.3e", worst) + " over " + std::to_string(instances) + " instances, " +
             std::to_string(rows.size()) + " checks, " + fmt("%.1f", secs) + " s single-threaded";
  o.fingerprint = tr.digest();
  return o;
}

Outcome c2_ellipsoid() {
  Trace tr;
  RngStream rng(2);
  double worst[2] = {0.0, 0.0};
  for (int k = 0; k < 2; ++k) {
    const NormKind kind = k == 0 ? NormKind::LayerNorm : NormKind::RMSNorm;
    for (int t = 0; t < 10000; ++t) {
      const std::size_t d = 2 + t % 15;
      const LNParams p = random_site(d, 0.0, kind, rng);
      const Vector x = random_normal_vector(d, rng.uniform(0.1, 10.0), rng);
      worst[k] = std::max(worst[k], std::abs(ellipsoid_residual(ln_forward(x, p), p)));
    }
    tr.add(worst[k]);
  }
  Outcome o;
  o.pass = worst[0] <= 1e-9 && worst[1] <= 1e-9;
  o.detail = "max |residual| layernorm " + fmt("%.3e", worst[0]) + ", rmsnorm " + fmt("%.3e", worst[1]) +
             " (10^4 tokens each)";
  o.fingerprint = tr.digest();
  return o;
}

Outcome c3_scaling() {
  Trace tr;
  RngStream rng(3);
  double worst = 0.0;
  for (int k = 0; k < 2; ++k) {
    const NormKind kind = k == 0 ? NormKind::LayerNorm : NormKind::RMSNorm;
    for (int t = 0; t < 1000; ++t) {
      // In d = 2 the LayerNorm Jacobian vanishes identically, leaving no relative scale.
      const std::size_t d = (kind == NormKind::LayerNorm ? 3 : 2) + t % 14;
      const LNParams p = random_site(d, 0.0, kind, rng);
      const Vector x = random_normal_vector(d, rng.uniform(0.2, 5.0), rng);
      const Matrix j = ln_jacobian(x, p);
      for (double c : {2.0, 10.0, 1e3}) {
        Vector cx = x;
        for (double& v : cx) v *= c;
        Matrix expected = j;
        expected *= 1.0 / c;
        worst = std::max(worst, frobenius_norm(ln_jacobian(cx, p) - expected) / frobenius_norm(expected));
      }
    }
  }
  tr.add(worst);
  Outcome o;
  o.pass = worst <= 1e-12;
  o.detail = "max relative deviation " + fmt("%.3e", worst) + " over 2000 tokens, c in {2, 10, 1000}";
  o.fingerprint = tr.digest();
  return o;
}

Outcome c4_peri_invariance() {
  Trace tr;
  double worst[2] = {0.0, 0.0};
  for (int e = 0; e < 2; ++e) {
    const double eps = e == 0 ? 0.0 : 1e-5;
    RngStream rng(4);
    for (int s = 0; s < 50; ++s) {
      ModelConfig cfg = peri_config(1, 1.0, eps);
      cfg.d = 3 + s % 6;
      cfg.n = 1 + s % 5;
      cfg.heads = 1 + s % 2;
      cfg.activation = Activation::Relu;
      const auto params = init_model(cfg, rng);
      const ForwardTape tape = model_forward(random_normal(cfg.d, cfg.n, 1.0, rng), params, cfg);
      for (Sublayer sub : {Sublayer::Attention, Sublayer::Ffn}) {
        for (auto [c1, c2] : {std::pair{10.0, 10.0}, std::pair{1e3, 1e-2}}) {
          const double dev = rescale_invariance_test(tape, 0, c1, c2, sub).max_abs_dev;
          worst[e] = std::max(worst[e], dev);
          tr.add(dev);
        }
      }
    }
  }
  Outcome o;
  const bool exact = worst[0] <= 1e-10;
  const bool smoothed = worst[1] <= 1e-6;
  o.pass = exact && smoothed;
  o.detail = std::string("eps=0: ") + (exact ? "pass" : "fail") + " max dev " + fmt("%.3e", worst[0]) +
             " (tol 1e-10); eps=1e-5: " + (smoothed ? "pass" : "fail") + " max dev " + fmt("%.3e", worst[1]) +
             " (tol 1e-6); 50 blocks x 2 sublayers x 2 scalings";
  o.fingerprint = tr.digest();
  return o;
}

Outcome c5_pre_growth() {
  Trace tr;
  RngStream rng(5);
  double worst = 0.0;
  for (int s = 0; s < 50; ++s) {
    ModelConfig cfg = peri_config(1, s % 2 ? 0.5 : 1.0);
    cfg.placement = Placement::Pre;
    cfg.d = 3 + s % 6;
    cfg.n = 1 + s % 5;
    cfg.heads = 1 + s % 2;
    const ForwardTape tape =
        model_forward(random_normal(cfg.d, cfg.n, 1.0, rng), init_model(cfg, rng), cfg);
    const std::size_t nd = cfg.d * cfg.n;
    const Matrix eye = Matrix::identity(nd);
    Matrix base = sublayer_sensitivity(tape.blocks[0].attn, tape.params[0], cfg, Sublayer::Attention) - eye;
    base *= 1.0 / cfg.delta_t;
    for (auto [c1, c2] : {std::pair{10.0, 10.0}, std::pair{1e3, 1e-2}}) {
      auto scaled = tape.params;
      for (auto& h : scaled[0].attn.heads) {
        h.out *= c1;
        h.value *= c2;
      }
      const ForwardTape st = model_forward(tape.states[0], scaled, cfg);
      Matrix grown = sublayer_sensitivity(st.blocks[0].attn, scaled[0], cfg, Sublayer::Attention) - eye;
      grown *= 1.0 / cfg.delta_t;
      Matrix expected = base;
      expected *= c1 * c2;
      const double err = frobenius_norm(grown - expected) / frobenius_norm(expected);
      worst = std::max(worst, err);
      tr.add(err);
    }
  }
  Outcome o;
  o.pass = worst <= 1e-8;
  o.detail = "max relative error " + fmt("%.3e", worst) + " over 50 blocks x 2 scalings";
  o.fingerprint = tr.digest();
  return o;
}

Outcome c6_growth() {
  constexpr std::size_t kModels = 100;
  const std::array<std::size_t, 4> depths{8, 16, 32, 64};
  std::vector<double> min_margin(kModels * 3, INFINITY);
  parallel_for(kModels, thread_budget(), [&](std::size_t i) {
    RngStream rng(6, i);
    const ModelConfig cfg = peri_config(depths[i % 4], (i / 4) % 2 ? 0.1 : 1.0);
    const auto params = random_peri(cfg, rng);
    const auto growth = peri_growth_check(model_forward(random_normal(cfg.d, cfg.n, 1.0, rng), params, cfg));
    min_margin[3 * i] = growth[0].margin;
    min_margin[3 * i + 1] = growth[1].margin;
    std::vector<Matrix> inputs;
    for (int s = 0; s < 64; ++s) inputs.push_back(random_normal(cfg.d, cfg.n, 1.0, rng));
    for (std::size_t r = 0; r < cfg.d; ++r)
      for (std::size_t c = 0; c < cfg.n; ++c)
        min_margin[3 * i + 2] =
            std::min(min_margin[3 * i + 2], datawise_variance_check(inputs, params, cfg, r, c).margin);
  });
  Trace tr;
  double worst[3] = {INFINITY, INFINITY, INFINITY};
  for (std::size_t i = 0; i < min_margin.size(); ++i) {
    worst[i % 3] = std::min(worst[i % 3], min_margin[i]);
    tr.add(min_margin[i]);
  }
  Outcome o;
  o.pass = worst[0] >= -1e-9 && worst[1] >= -1e-9 && worst[2] >= -1e-9;
  o.detail = "min margins: MA " + fmt("%.4g", worst[0]) + ", Var " + fmt("%.4g", worst[1]) + ", datawise Var " +
             fmt("%.4g", worst[2]) + " over 100 models, D in {8,16,32,64}, dt in {1,0.1}";
  o.fingerprint = tr.digest();
  return o;
}

Outcome c7_stability() {
  Trace tr;
  double path_min = INFINITY;
  {
    RngStream rng(7, 0);
    for (int t = 0; t < 100; ++t) {
      const ModelConfig cfg = peri_config(2 + t % 15, t % 2 ? 0.1 : 1.0);
      const auto params = random_peri(cfg, rng);
      const Matrix a = random_normal(cfg.d, cfg.n, 1.0, rng);
      const Matrix b = random_normal(cfg.d, cfg.n, 1.0, rng);
      const double m = pathwise_stability_check(a, b, params, cfg).margin;
      path_min = std::min(path_min, m);
      tr.add(m);
    }
  }
  std::vector<double> w_margin(20);
  parallel_for(20, thread_budget(), [&](std::size_t i) {
    RngStream rng(7, 1 + i);
    const ModelConfig cfg = peri_config(4 + i % 5, i % 2 ? 0.1 : 1.0);
    const auto params = random_peri(cfg, rng);
    std::vector<Matrix> mu;
    std::vector<Matrix> nu;
    for (int s = 0; s < 32; ++s) mu.push_back(random_normal(cfg.d, cfg.n, 1.0, rng));
    for (int s = 0; s < 32; ++s) nu.push_back(random_normal(cfg.d, cfg.n, 1.5, rng));
    w_margin[i] = wasserstein_stability_check(mu, nu, params, cfg, 2.0).margin;
  });
  double w_min = INFINITY;
  for (double m : w_margin) {
    w_min = std::min(w_min, m);
    tr.add(m);
  }
  double brute = 0.0;
  {
    RngStream rng(7, 100);
    for (int t = 0; t < 50; ++t) {
      std::vector<Matrix> a;
      std::vector<Matrix> b;
      for (int s = 0; s < 5; ++s) {
        a.push_back(random_normal(3, 2, 1.0, rng));
        b.push_back(random_normal(3, 2, 1.0, rng));
      }
      const double p = 1.0 + t % 3;
      const double diff = std::abs(wasserstein_exact(a, b, p) - oracle::brute_force_wasserstein(a, b, p));
      brute = std::max(brute, diff);
      tr.add(diff);
    }
  }
  Outcome o;
  o.pass = path_min >= -1e-9 && w_min >= -1e-9 && brute <= 1e-12;
  o.detail = "pathwise min margin " + fmt("%.4g", path_min) + " (100 pairs); W2 min margin " + fmt("%.4g", w_min) +
             " (20 instances, N=32); |hungarian - brute force| max " + fmt("%.3e", brute) + " (50 sets, N=5)";
  o.fingerprint = tr.digest();
  return o;
}

Outcome c8_pre_chain() {
  Trace tr;
  double chain_min = INFINITY;
  RngStream rng(8, 0);
  for (int t = 0; t < 50; ++t) {
    std::vector<Matrix> ws;
    std::vector<Vector> gs;
    for (int i = 0; i < 16; ++i) {
      ws.push_back(random_normal(4, 4, 0.5, rng));
      gs.push_back(random_normal_vector(4, 1.0, rng));
    }
    const double m = pre_exponential_bound(simplified_pre_chain(random_normal(4, 3, 1.0, rng), ws, gs)).margin;
    chain_min = std::min(chain_min, m);
    tr.add(m);
  }

  // ‖W_i‖₂ = 3, D = 32, against a Peri model of the same size and input.
  std::size_t wins = 0;
  double min_ratio = INFINITY;
  double max_ratio = 0.0;
  double min_rhs_growth = INFINITY;
  for (std::uint64_t s = 0; s < 20; ++s) {
    RngStream chain_rng(8, 1 + s);
    const Matrix x0 = random_normal(4, 3, 1.0, chain_rng);
    std::vector<Matrix> ws;
    for (int i = 0; i < 32; ++i) {
      Matrix w = random_normal(4, 4, 1.0, chain_rng);
      w *= 3.0 / spectral_norm(w);
      ws.push_back(w);
    }
    const std::vector<Vector> gs(32, Vector(4, 1.0));
    const PreChainResult chain = simplified_pre_chain(x0, ws, gs);
    const ModelConfig cfg = peri_config(32, 1.0);
    RngStream model_rng(8, 100 + s);
    const double peri_ma = moments(model_forward(x0, init_model(cfg, model_rng), cfg).output()).mean_abs;
    const double ratio = chain.mean_abs / peri_ma;
    wins += ratio >= 10.0 ? 1 : 0;
    min_ratio = std::min(min_ratio, ratio);
    max_ratio = std::max(max_ratio, ratio);
    const double growth = chain.bound_rhs / (frobenius_norm(x0) / std::sqrt(12.0));
    min_rhs_growth = std::min(min_rhs_growth, growth);
    tr.add(ratio);
    tr.add(chain.bound_rhs);
  }
  const bool bound_ok = chain_min >= 0.0;
  const bool witness = wins >= 18;
  Outcome o;
  o.pass = bound_ok && witness;
  o.detail = std::string("bound: ") + (bound_ok ? "pass" : "fail") + " min margin " + fmt("%.4g", chain_min) +
             " (50 chains); growth witness: " + (witness ? "pass" : "fail") + " chain/peri MA ratio >= 10 on " +
             std::to_string(wins) + "/20 seeds (ratio range " + fmt("%.3g", min_ratio) + ".." +
             fmt("%.3g", max_ratio) + ", bound RHS growth >= " + fmt("%.3g", min_rhs_growth) + "x)";
  o.fingerprint = tr.digest();
  return o;
}

Outcome c9_hamiltonian() {
  std::vector<double> margin(20);
  std::vector<double> resid(20);
  parallel_for(20, thread_budget(), [&](std::size_t i) {
    RngStream rng(9, i);
    const std::size_t d = 2 + i % 7;
    const std::size_t n = 1 + i % 4;
    const LNParams site = random_site(d, 0.0, NormKind::LayerNorm, rng);
    const Matrix adj = random_normal(d, n, 1.0, rng);
    const Matrix fstar = hamiltonian_maximizer(adj, site.gamma, site.beta);
    double r = 0.0;
    for (std::size_t j = 0; j < n; ++j) r = std::max(r, std::abs(ellipsoid_residual(fstar.col(j), site)));
    resid[i] = r;
    const double best = hamiltonian_value(adj, fstar);
    double m = INFINITY;
    for (int s = 0; s < 10000; ++s) {
      Matrix f(d, n);
      for (std::size_t j = 0; j < n; ++j) f.set_col(j, sample_ellipsoid(site, rng));
      m = std::min(m, best - hamiltonian_value(adj, f));
    }
    margin[i] = m;
  });
  Trace tr;
  double m_min = INFINITY;
  double r_max = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    m_min = std::min(m_min, margin[i]);
    r_max = std::max(r_max, resid[i]);
    tr.add(margin[i]);
    tr.add(resid[i]);
  }
  Outcome o;
  o.pass = m_min >= -1e-9 && r_max <= 1e-10;
  o.detail = "min dominance margin " + fmt("%.4g", m_min) + " (20 x 10^4 samples), max ellipsoid residual " +
             fmt("%.3e", r_max);
  o.fingerprint = tr.digest();
  return o;
}

Outcome c10_projection() {
  Trace tr;
  RngStream rng(10);
  double ortho = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t d = 2 + t % 8;
    const LNParams site = random_site(d, 0.0, NormKind::LayerNorm, rng);
    const Vector x = sample_ellipsoid(site, rng);
    const Vector f = random_normal_vector(d, 1.0, rng);
    const Vector v = postln_projection(x, f, site);
    double s = 0.0;
    for (std::size_t a = 0; a < d; ++a) s += (x[a] - site.beta[a]) * v[a] / (site.gamma[a] * site.gamma[a]);
    ortho = std::max(ortho, std::abs(s));
  }
  tr.add(ortho);

  double constancy = 0.0;
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = 2 + t % 5;
    const LNParams site = random_site(d, 0.0, NormKind::LayerNorm, rng);
    const Matrix a = random_normal(d, d, 1.0, rng);
    const TokenField field = [&](std::span<const double> x) { return matvec(a, x); };
    for (const auto& x : integrate_projected_flow(sample_ellipsoid(site, rng), field, site, {200, 1e-2, true}))
      constancy = std::max(constancy, std::abs(ellipsoid_residual(x, site)));
  }
  tr.add(constancy);

  // Raw Euler drift per step over a fixed number of steps while halving h.
  std::vector<double> slopes;
  for (int t = 0; t < 10; ++t) {
    const std::size_t d = 3 + t % 4;
    const LNParams site = random_site(d, 0.0, NormKind::LayerNorm, rng);
    const Matrix a = random_normal(d, d, 1.0, rng);
    const TokenField field = [&](std::span<const double> x) { return matvec(a, x); };
    const Vector x0 = sample_ellipsoid(site, rng);
    std::vector<double> lx;
    std::vector<double> ly;
    for (double h : {1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4}) {
      const auto traj = integrate_projected_flow(x0, field, site, {10, h, false});
      lx.push_back(std::log(h));
      ly.push_back(std::log(std::abs(ellipsoid_residual(traj.back(), site)) / 10.0));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    slopes.push_back(sxy / sxx);
    tr.add(slopes.back());
  }
  const auto [lo, hi] = std::minmax_element(slopes.begin(), slopes.end());
  Outcome o;
  o.pass = ortho <= 1e-12 && constancy <= 1e-9 && *lo >= 1.7 && *hi <= 2.3;
  o.detail = "orthogonality " + fmt("%.3e", ortho) + ", flow residual " + fmt("%.3e", constancy) +
             ", drift slope range " + fmt("%.3f", *lo) + ".." + fmt("%.3f", *hi) + " (10 fields)";
  o.fingerprint = tr.digest();
  return o;
}

Outcome c11_divergence() {
  const RunConfig rc = load_run_config(std::string(LNLAB_CONFIG_DIR) + "/aggressive_regime.json");
  std::vector<std::uint64_t> seeds(rc.sweep.seed_count);
  std::iota(seeds.begin(), seeds.end(), rc.seed);
  TrainConfig base = rc.train;
  base.seed = rc.seed;
  const std::vector<Placement> placements{Placement::Off, Placement::Pre, Placement::Peri};
  const std::vector<double> decays{0.0, 0.1};
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = stability_trial(base, placements, decays, seeds, thread_budget());
  const double secs = seconds_since(t0);
  Trace tr;
  for (const auto& r : records) {
    tr.add(static_cast<std::size_t>(r.outcome.diverged));
    tr.add(r.outcome.final_loss);
  }
  std::size_t cnt[3][2] = {};
  for (const auto& c : divergence_counts(records)) {
    const std::size_t p = c.placement == Placement::Off ? 0 : c.placement == Placement::Pre ? 1 : 2;
    cnt[p][c.weight_decay == 0.0 ? 0 : 1] = c.diverged;
  }
  bool ok = cnt[1][1] <= cnt[1][0];
  for (int w = 0; w < 2; ++w) ok = ok && cnt[0][w] >= cnt[1][w] && cnt[1][w] >= cnt[2][w] && cnt[2][w] == 0;
  Outcome o;
  o.pass = ok && secs <= 600.0;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "diverged/20 at wd=0: off %zu, pre %zu, peri %zu; wd=0.1: off %zu, pre %zu, peri %zu; %.1f s on %zu threads",
                cnt[0][0], cnt[1][0], cnt[2][0], cnt[0][1], cnt[1][1], cnt[2][1], secs, thread_budget());
  o.detail = buf;
  o.fingerprint = tr.digest();
  return o;
}

Outcome c12_step_size() {
  Trace tr;
  RngStream rng(12);
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  for (int t = 0; t < 20; ++t) {
    ModelConfig cfg = peri_config(16, 1.0);
    const auto params = init_model(cfg, rng);
    const Matrix x0 = random_normal(cfg.d, cfg.n, 1.0, rng);
    const auto full = layer_increments(model_forward(x0, params, cfg));
    cfg.delta_t = 0.1;
    const auto small = layer_increments(model_forward(x0, params, cfg));
    for (std::size_t i = 0; i < full.size(); ++i) {
      violations += small[i] < full[i] ? 0 : 1;
      worst_ratio = std::max(worst_ratio, small[i] / full[i]);
      tr.add(small[i]);
      tr.add(full[i]);
    }
  }
  Outcome o;
  o.pass = violations == 0;
  o.detail = std::to_string(violations) + " layers violating over 20 models x 16 layers, max increment ratio " +
             fmt("%.3f", worst_ratio);
  o.fingerprint = tr.digest();
  return o;
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"1 gradient oracle suite", c1_gradients},
      {"2 ellipsoid membership", c2_ellipsoid},
      {"3 normalization jacobian scaling", c3_scaling},
      {"4 peri sensitivity rescale invariance", c4_peri_invariance},
      {"5 pre sensitivity proportional growth", c5_pre_growth},
      {"6 peri moment and datawise variance bounds", c6_growth},
      {"7 pathwise and wasserstein stability", c7_stability},
      {"8 simplified pre chain bound and growth witness", c8_pre_chain},
      {"9 hamiltonian maximizer", c9_hamiltonian},
      {"10 post-ln projection and flow", c10_projection},
      {"11 divergence counts in the aggressive regime", c11_divergence},
      {"12 per-layer increments shrink with the step", c12_step_size},
  };
  bool all = true;
  std::vector<std::string> prints;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    all = all && o.pass;
    prints.push_back(o.fingerprint);
  }

  std::size_t mismatched = 0;
  std::string which;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::string again;
    try {
      again = criteria[i].run().fingerprint;
    } catch (const std::exception&) {
    }
    if (again.empty() || again != prints[i]) {
      ++mismatched;
      which += " " + std::to_string(i + 1);
    }
  }
  const bool det = mismatched == 0;
  std::printf("%s 13 determinism: %s\n", det ? "PASS" : "FAIL",
              det ? "criteria 1-12 reproduced identical fingerprints on a second run"
                  : ("fingerprints differ for criteria" + which).c_str());
  all = all && det;
  return all ? 0 : 1;
}
