#include "lnlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include <CLI11.hpp>

#include "lnlab/config.hpp"
#include "lnlab/diagnostics.hpp"
#include "lnlab/error.hpp"
#include "lnlab/numerics.hpp"
#include "lnlab/optimal_transport.hpp"
#include "lnlab/report.hpp"
#include "lnlab/rng.hpp"
#include "lnlab/training.hpp"

namespace lnlab {

std::string usage_text() {
  return "usage: lnlab <subcommand> [--config <path>] [--seed <u64>] [--placement off|pre|peri|post]\n"
         "             [--delta-t <f64>] [--depth <u32>] [--instances <u32>] [--out <dir>]\n"
         "             [--format csv|jsonl]\n"
         "subcommands:\n"
         "  gradcheck  analytic vs finite-difference Jacobians and parameter gradients\n"
         "  bounds     hidden-state growth and stability bounds (peri placement)\n"
         "  diagnose   per-layer moments of one random model\n"
         "  train      one training run\n"
         "  sweep      divergence counts over placements, weight decay and seeds\n"
         "  ot-check   exact Wasserstein solver against brute force\n"
         "  report     summarize the CSV/JSONL files already in the output directory\n"
         "environment: LNLAB_THREADS caps worker threads\n";
}

namespace {

std::string fmt(double v) { return format_number(v); }

void apply_overrides(RunConfig& c, const Overrides& o) {
  try {
    if (o.seed) c.seed = *o.seed;
    if (o.placement) c.model().placement = parse_placement(*o.placement);
    if (o.delta_t) c.model().delta_t = *o.delta_t;
    if (o.depth) c.model().depth = *o.depth;
    if (o.instances) c.diagnostics.instances = *o.instances;
    if (o.out) c.output = *o.out;
    if (o.format) c.format = parse_format(*o.format);
    c.train.seed = c.seed;
    c.train.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what(), "flags");
  }
}

std::vector<BlockParams> make_params(const RunConfig& c, RngStream& rng) {
  if (c.init == ModelInit::Zero)
    return std::vector<BlockParams>(c.model().depth, zero_block(c.model()));
  return init_model(c.model(), rng);
}

// Seed recorded for instance i of a randomized suite; every instance draws
// from RngStream(seed + i).
std::uint64_t instance_seed(const RunConfig& c, std::size_t i) { return c.seed + i; }

struct Context {
  RunConfig cfg;
  ReportWriter writer;
  std::ostream& out;
  std::ostream& err;
  std::size_t threads;
};

int cmd_gradcheck(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto rows = gradient_check_suite(c.seed, c.diagnostics.instances, ctx.threads);
  ctx.writer.write("gradcheck", gradcheck_table(rows));
  double worst = 0.0;
  const GradcheckRow* failing = nullptr;
  for (const auto& r : rows) {
    worst = std::max(worst, r.rel_err);
    if (!failing && !(r.rel_err <= c.diagnostics.gradcheck_tolerance)) failing = &r;
  }
  ctx.out << "gradcheck: " << rows.size() << " checks, max rel err " << fmt(worst) << "\n";
  if (failing) {
    ctx.err << "FAIL instance=" << failing->instance << " target=" << failing->target
            << " placement=" << failing->placement << " rel_err=" << fmt(failing->rel_err) << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

std::vector<BoundRow> bound_instance(const RunConfig& c, std::size_t i) {
  const ModelConfig& m = c.model();
  const std::uint64_t seed = instance_seed(c, i);
  RngStream rng(seed, 0);
  const auto params = make_params(c, rng);
  const Matrix x0 = random_normal(m.d, m.n, 1.0, rng);
  const auto& suites = c.diagnostics.suites;
  auto wants = [&](const char* s) { return std::find(suites.begin(), suites.end(), s) != suites.end(); };
  std::vector<BoundRow> rows;
  auto push = [&](BoundReport r) { rows.push_back({std::move(r), m.placement, seed}); };

  if (wants("growth"))
    for (auto& r : peri_growth_check(model_forward(x0, params, m))) push(r);
  if (wants("datawise")) {
    std::vector<Matrix> inputs;
    for (std::size_t s = 0; s < c.diagnostics.datawise_samples; ++s)
      inputs.push_back(random_normal(m.d, m.n, 1.0, rng));
    BoundReport worst;
    bool first = true;
    for (std::size_t col = 0; col < m.n; ++col)
      for (std::size_t row = 0; row < m.d; ++row) {
        BoundReport r = datawise_variance_check(inputs, params, m, row, col);
        if (first || r.margin < worst.margin) worst = r;
        first = false;
      }
    push(worst);
  }
  if (wants("pathwise")) push(pathwise_stability_check(x0, random_normal(m.d, m.n, 1.0, rng), params, m));
  if (wants("wasserstein")) {
    std::vector<Matrix> mu;
    std::vector<Matrix> nu;
    for (std::size_t s = 0; s < c.diagnostics.wasserstein_samples; ++s) {
      mu.push_back(random_normal(m.d, m.n, 1.0, rng));
      nu.push_back(random_normal(m.d, m.n, 1.0, rng) + Matrix(m.d, m.n, 0.5));
    }
    push(wasserstein_stability_check(mu, nu, params, m, c.diagnostics.wasserstein_p));
  }
  if (wants("pre_chain")) {
    std::vector<Matrix> weights;
    std::vector<Vector> gammas;
    const double sd = 1.0 / std::sqrt(static_cast<double>(m.d));
    for (std::size_t l = 0; l < m.depth; ++l) {
      weights.push_back(random_normal(m.d, m.d, sd, rng));
      gammas.emplace_back(m.d, 1.0);
    }
    BoundReport r = pre_exponential_bound(simplified_pre_chain(x0, weights, gammas, {}, {}, m.delta_t));
    r.context.delta_t = m.delta_t;
    rows.push_back({r, Placement::Pre, seed});
  }
  return rows;
}

int cmd_bounds(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto& suites = c.diagnostics.suites;
  const bool needs_peri = std::any_of(suites.begin(), suites.end(),
                                      [](const std::string& s) { return s != "pre_chain"; });
  if (needs_peri && c.model().placement != Placement::Peri)
    throw ConfigError("bounds: growth and stability suites require placement peri", "model.placement");
  std::vector<std::vector<BoundRow>> per(c.diagnostics.instances);
  parallel_for(per.size(), ctx.threads, [&](std::size_t i) { per[i] = bound_instance(c, i); });
  std::vector<BoundRow> rows;
  for (auto& v : per) rows.insert(rows.end(), v.begin(), v.end());
  ctx.writer.write("bounds", bounds_table(rows));
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& r : rows) worst = std::min(worst, r.report.margin);
  ctx.out << "bounds: " << rows.size() << " reports, min margin " << fmt(rows.empty() ? 0.0 : worst)
          << "\n";
  for (const auto& r : rows) {
    if (!r.report.holds(c.diagnostics.bound_slack)) {
      ctx.err << "FAIL check=" << r.report.name << " seed=" << r.seed << " lhs=" << fmt(r.report.lhs)
              << " rhs=" << fmt(r.report.rhs) << " margin=" << fmt(r.report.margin) << "\n";
      return kExitCheckFailed;
    }
  }
  return kExitOk;
}

int cmd_diagnose(Context& ctx) {
  const auto& c = ctx.cfg;
  const ModelConfig& m = c.model();
  RngStream rng(c.seed, 0);
  const auto params = make_params(c, rng);
  const Matrix x0 = random_normal(m.d, m.n, 1.0, rng);
  std::vector<MomentRow> rows;
  try {
    const auto ms = layer_moments(model_forward(x0, params, m));
    for (std::size_t l = 0; l < ms.size(); ++l) rows.push_back({l, ms[l], c.seed, m.placement, m.delta_t});
  } catch (const DivergenceError& e) {
    ctx.writer.write("moments", moments_table(rows));
    ctx.err << "FAIL diverged at block " << e.block() << ": " << e.what() << "\n";
    return kExitCheckFailed;
  }
  ctx.writer.write("moments", moments_table(rows));
  const auto& last = rows.back().moments;
  ctx.out << "diagnose: " << rows.size() << " layers, final MA " << fmt(last.mean_abs) << ", Var "
          << fmt(last.var) << "\n";
  return kExitOk;
}

int cmd_train(Context& ctx) {
  const auto& c = ctx.cfg;
  TrialRecord rec{c.model().placement, c.train.weight_decay, c.seed, train_run(c.train)};
  ctx.writer.write("trials", trials_table({rec}));
  std::vector<MomentRow> moments;
  if (!rec.outcome.moment_curves.empty()) {
    const auto& last = rec.outcome.moment_curves.back();
    for (std::size_t l = 0; l < last.layers.size(); ++l)
      moments.push_back({l, last.layers[l], c.seed, c.model().placement, c.model().delta_t});
  }
  ctx.writer.write("moments", moments_table(moments));
  ReportTable loss{{"step", "loss"}, {}};
  for (std::size_t s = 0; s < rec.outcome.loss_curve.size(); ++s)
    loss.rows.push_back({std::uint64_t{s}, rec.outcome.loss_curve[s]});
  ctx.writer.write("loss", loss);
  if (rec.outcome.diverged) {
    ctx.err << "FAIL placement=" << to_string(rec.placement) << " seed=" << rec.seed
            << " diverged at step " << *rec.outcome.first_divergence_step << "\n";
    return kExitCheckFailed;
  }
  ctx.out << "train: final loss " << fmt(rec.outcome.final_loss) << "\n";
  return kExitOk;
}

const DivergenceCount* find_count(const std::vector<DivergenceCount>& counts, Placement p, double wd) {
  for (const auto& c : counts)
    if (c.placement == p && c.weight_decay == wd) return &c;
  return nullptr;
}

int cmd_sweep(Context& ctx) {
  const auto& c = ctx.cfg;
  std::vector<std::uint64_t> seeds(c.sweep.seed_count);
  std::iota(seeds.begin(), seeds.end(), c.seed);
  const auto records =
      stability_trial(c.train, c.sweep.placements, c.sweep.weight_decays, seeds, ctx.threads);
  ctx.writer.write("trials", trials_table(records));
  std::vector<MomentRow> moments;
  for (const auto& r : records) {
    if (r.outcome.moment_curves.empty()) continue;
    const auto& last = r.outcome.moment_curves.back();
    for (std::size_t l = 0; l < last.layers.size(); ++l)
      moments.push_back({l, last.layers[l], r.seed, r.placement, c.model().delta_t});
  }
  ctx.writer.write("sweep_moments", moments_table(moments));
  const auto counts = divergence_counts(records);
  ReportTable table{{"placement", "weight_decay", "diverged", "runs"}, {}};
  for (const auto& k : counts) {
    table.rows.push_back({to_string(k.placement), k.weight_decay, std::uint64_t{k.diverged},
                          std::uint64_t{k.runs}});
    ctx.out << "sweep: " << to_string(k.placement) << " weight_decay=" << fmt(k.weight_decay)
            << " diverged " << k.diverged << "/" << k.runs << "\n";
  }
  ctx.writer.write("sweep_counts", table);

  for (double wd : c.sweep.weight_decays) {
    const auto* off = find_count(counts, Placement::Off, wd);
    const auto* pre = find_count(counts, Placement::Pre, wd);
    const auto* peri = find_count(counts, Placement::Peri, wd);
    if (peri && peri->diverged != 0) {
      ctx.err << "FAIL placement=peri weight_decay=" << fmt(wd) << " diverged=" << peri->diverged << "\n";
      return kExitCheckFailed;
    }
    if (off && pre && off->diverged < pre->diverged) {
      ctx.err << "FAIL weight_decay=" << fmt(wd) << " off diverged " << off->diverged << " < pre "
              << pre->diverged << "\n";
      return kExitCheckFailed;
    }
    if (pre && peri && pre->diverged < peri->diverged) {
      ctx.err << "FAIL weight_decay=" << fmt(wd) << " pre diverged " << pre->diverged << " < peri "
              << peri->diverged << "\n";
      return kExitCheckFailed;
    }
  }
  std::vector<double> wds = c.sweep.weight_decays;
  std::sort(wds.begin(), wds.end());
  for (std::size_t i = 1; i < wds.size(); ++i) {
    const auto* lo = find_count(counts, Placement::Pre, wds[i - 1]);
    const auto* hi = find_count(counts, Placement::Pre, wds[i]);
    if (lo && hi && hi->diverged > lo->diverged) {
      ctx.err << "FAIL placement=pre weight_decay=" << fmt(wds[i]) << " diverged " << hi->diverged
              << " > weight_decay=" << fmt(wds[i - 1]) << " diverged " << lo->diverged << "\n";
      return kExitCheckFailed;
    }
  }
  return kExitOk;
}

double brute_force_wasserstein(const std::vector<Matrix>& a, const std::vector<Matrix>& b, double p) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += entrywise_pnorm_pow(a[i] - b[perm[i]], p);
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return std::pow(best / static_cast<double>(a.size()), 1.0 / p);
}

int cmd_ot_check(Context& ctx) {
  const auto& c = ctx.cfg;
  const ModelConfig& m = c.model();
  constexpr std::size_t kAtoms = 5;
  const double p = c.diagnostics.wasserstein_p;
  struct Row {
    std::uint64_t seed;
    std::string check;
    double value;
    double reference;
    double tolerance;
  };
  std::vector<std::vector<Row>> per(c.diagnostics.instances);
  parallel_for(per.size(), ctx.threads, [&](std::size_t i) {
    const std::uint64_t seed = instance_seed(c, i);
    RngStream rng(seed, 0);
    auto cloud = [&] {
      std::vector<Matrix> s;
      for (std::size_t k = 0; k < kAtoms; ++k) s.push_back(random_normal(m.d, m.n, 1.0, rng));
      return s;
    };
    const auto a = cloud();
    const auto b = cloud();
    const auto e = cloud();
    const double ab = wasserstein_exact(a, b, p);
    per[i].push_back({seed, "hungarian_vs_brute_force", ab, brute_force_wasserstein(a, b, p), 1e-12});
    per[i].push_back({seed, "symmetry", wasserstein_exact(b, a, p), ab, 1e-9});
    const double bound = ab + wasserstein_exact(b, e, p);
    const double ae = wasserstein_exact(a, e, p);
    per[i].push_back({seed, "triangle", std::max(ae, bound), bound, 1e-9});
  });
  ReportTable table{{"seed", "check", "value", "reference", "abs_diff"}, {}};
  const Row* failing = nullptr;
  double worst = 0.0;
  for (const auto& v : per) {
    for (const auto& r : v) {
      const double diff = std::abs(r.value - r.reference);
      table.rows.push_back({r.seed, r.check, r.value, r.reference, diff});
      if (r.check == "hungarian_vs_brute_force") worst = std::max(worst, diff);
      if (!failing && !(diff <= r.tolerance)) failing = &r;
    }
  }
  ctx.writer.write("ot", table);
  ctx.out << "ot-check: " << table.rows.size() << " checks, max |hungarian - brute force| "
          << fmt(worst) << "\n";
  if (failing) {
    ctx.err << "FAIL check=" << failing->check << " seed=" << failing->seed << " value="
            << fmt(failing->value) << " reference=" << fmt(failing->reference) << "\n";
    return kExitCheckFailed;
  }
  return kExitOk;
}

struct SummaryRow {
  std::string criterion;
  std::string source;
  bool pass;
  std::string detail;
};

double cell_number(const std::string& s) {
  if (s.empty()) return std::nan("");
  return std::strtod(s.c_str(), nullptr);
}

int cmd_report(Context& ctx) {
  const auto& c = ctx.cfg;
  const auto ext = extension(c.format);
  auto path_of = [&](const char* stem) { return c.output / (std::string(stem) + ext); };
  std::vector<SummaryRow> rows;

  if (std::filesystem::exists(path_of("gradcheck"))) {
    const RawTable t = read_report(path_of("gradcheck"), c.format);
    const std::size_t col = t.column("rel_err");
    double worst = 0.0;
    for (const auto& r : t.rows) worst = std::max(worst, cell_number(r[col]));
    rows.push_back({"gradient_oracle", "gradcheck", worst <= c.diagnostics.gradcheck_tolerance,
                    "max rel_err " + fmt(worst)});
  }
  if (std::filesystem::exists(path_of("bounds"))) {
    const RawTable t = read_report(path_of("bounds"), c.format);
    const std::size_t check = t.column("check");
    const std::size_t margin = t.column("margin");
    std::map<std::string, double> worst;
    for (const auto& r : t.rows) {
      const double v = cell_number(r[margin]);
      auto [it, inserted] = worst.emplace(r[check], v);
      if (!inserted) it->second = std::min(it->second, v);
    }
    for (const auto& [name, w] : worst)
      rows.push_back({"bound_" + name, "bounds", w >= -c.diagnostics.bound_slack,
                      "min margin " + fmt(w)});
  }
  if (std::filesystem::exists(path_of("ot"))) {
    const RawTable t = read_report(path_of("ot"), c.format);
    const std::size_t check = t.column("check");
    const std::size_t diff = t.column("abs_diff");
    double worst = 0.0;
    for (const auto& r : t.rows)
      if (r[check] == "hungarian_vs_brute_force") worst = std::max(worst, cell_number(r[diff]));
    rows.push_back({"hungarian_exactness", "ot", worst <= 1e-12, "max abs diff " + fmt(worst)});
  }
  if (std::filesystem::exists(path_of("trials"))) {
    const RawTable t = read_report(path_of("trials"), c.format);
    const std::size_t pl = t.column("placement");
    const std::size_t wd = t.column("weight_decay");
    const std::size_t dv = t.column("diverged");
    std::map<std::pair<std::string, double>, std::size_t> count;
    std::set<double> decays;
    for (const auto& r : t.rows) {
      const double w = cell_number(r[wd]);
      decays.insert(w);
      count[{r[pl], w}] += r[dv] == "true" ? 1 : 0;
    }
    bool ok = true;
    std::string detail;
    for (double w : decays) {
      auto get = [&](const char* p) {
        auto it = count.find({p, w});
        return it == count.end() ? -1L : static_cast<long>(it->second);
      };
      const long off = get("off");
      const long pre = get("pre");
      const long peri = get("peri");
      if (peri > 0) ok = false;
      if (off >= 0 && pre >= 0 && off < pre) ok = false;
      if (pre >= 0 && peri >= 0 && pre < peri) ok = false;
      detail += "wd=" + fmt(w) + " off=" + std::to_string(off) + " pre=" + std::to_string(pre) +
                " peri=" + std::to_string(peri) + "; ";
    }
    long prev = -1;
    for (double w : decays) {
      auto it = count.find({"pre", w});
      if (it == count.end()) continue;
      if (prev >= 0 && static_cast<long>(it->second) > prev) ok = false;
      prev = static_cast<long>(it->second);
    }
    rows.push_back({"divergence_ordering", "trials", ok, detail});
  }
  if (std::filesystem::exists(path_of("moments"))) {
    const RawTable t = read_report(path_of("moments"), c.format);
    const std::size_t ma = t.column("ma");
    bool finite = true;
    for (const auto& r : t.rows) finite = finite && std::isfinite(cell_number(r[ma]));
    rows.push_back({"moment_series", "moments", finite, std::to_string(t.rows.size()) + " rows"});
  }

  ReportTable summary{{"criterion", "source", "status", "detail"}, {}};
  for (const auto& r : rows) {
    summary.rows.push_back({r.criterion, r.source, std::string(r.pass ? "PASS" : "FAIL"), r.detail});
    ctx.out << (r.pass ? "PASS " : "FAIL ") << r.criterion << " (" << r.detail << ")\n";
  }
  ctx.writer.write("summary", summary);
  if (rows.empty()) {
    ctx.err << "FAIL no report files found in '" << c.output.string() << "'\n";
    return kExitCheckFailed;
  }
  for (const auto& r : rows) {
    if (!r.pass) {
      ctx.err << "FAIL criterion=" << r.criterion << " " << r.detail << "\n";
      return kExitCheckFailed;
    }
  }
  return kExitOk;
}

const std::map<std::string, std::function<int(Context&)>>& commands() {
  static const std::map<std::string, std::function<int(Context&)>> table{
      {"gradcheck", cmd_gradcheck}, {"bounds", cmd_bounds},     {"diagnose", cmd_diagnose},
      {"train", cmd_train},         {"sweep", cmd_sweep},       {"ot-check", cmd_ot_check},
      {"report", cmd_report}};
  return table;
}

}  // namespace

int run_subcommand(const std::string& name, const std::optional<std::filesystem::path>& config,
                   const Overrides& overrides, std::ostream& out, std::ostream& err) {
  const auto it = commands().find(name);
  if (it == commands().end()) {
    err << "unknown subcommand '" << name << "'\n" << usage_text();
    return kExitUsage;
  }
  try {
    RunConfig cfg = config ? load_run_config(*config) : RunConfig{};
    apply_overrides(cfg, overrides);
    Context ctx{cfg, ReportWriter(cfg.output, cfg.format), out, err, thread_budget()};
    return it->second(ctx);
  } catch (const ConfigError& e) {
    err << "config error (" << e.field() << "): " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "FAIL " << name << ": " << e.what() << "\n";
    return kExitCheckFailed;
  }
}

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"layer-normalization placement lab"};
  std::string sub;
  std::optional<std::string> config;
  Overrides o;
  app.add_option("subcommand", sub, "gradcheck|bounds|diagnose|train|sweep|ot-check|report")->required();
  app.add_option("--config", config, "JSON run configuration");
  app.add_option("--seed", o.seed, "base seed");
  app.add_option("--placement", o.placement, "off|pre|peri|post");
  app.add_option("--delta-t", o.delta_t, "residual step in (0, 1]");
  app.add_option("--depth", o.depth, "number of blocks");
  app.add_option("--instances", o.instances, "randomized instances per suite");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--format", o.format, "csv|jsonl");
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << usage_text();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << usage_text();
    return kExitUsage;
  }
  std::optional<std::filesystem::path> config_path;
  if (config) config_path = *config;
  return run_subcommand(sub, config_path, o, out, err);
}

}  // namespace lnlab
