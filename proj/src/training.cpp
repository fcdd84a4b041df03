#include "lnlab/training.hpp"

#include <cmath>
#include <limits>

#include "lnlab/diagnostics.hpp"
#include "lnlab/error.hpp"

namespace lnlab {

std::string to_string(TaskKind t) {
  return t == TaskKind::MeanRegression ? "mean-regression" : "noisy-copy";
}

TaskKind parse_task(const std::string& name) {
  if (name == "mean-regression") return TaskKind::MeanRegression;
  if (name == "noisy-copy") return TaskKind::NoisyCopy;
  throw DomainError("unknown task '" + name + "' (expected mean-regression or noisy-copy)");
}

void TrainConfig::validate() const {
  model.validate();
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw DomainError("train: lr must be finite and >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw DomainError("train: momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw DomainError("train: weight_decay must be >= 0");
  if (!(divergence_threshold > 0.0)) throw DomainError("train: divergence_threshold must be > 0");
  if (batch_size == 0) throw DomainError("train: batch_size must be >= 1");
  if (!(noise >= 0.0)) throw DomainError("train: noise must be >= 0");
}

TaskGenerator::TaskGenerator(TaskKind kind, std::size_t d, std::size_t n, std::uint64_t seed,
                             double noise)
    : kind_(kind),
      d_(d),
      n_(n),
      noise_(noise),
      readout_(Matrix::identity(d)),
      rng_(seed, 2) {
  RngStream map_rng(seed, 1);
  target_map_ = random_normal(d, d, 1.0 / std::sqrt(static_cast<double>(d)), map_rng);
}

Sample TaskGenerator::next() {
  Sample s;
  const Matrix clean = random_normal(d_, n_, 1.0, rng_);
  if (kind_ == TaskKind::MeanRegression) {
    s.input = clean;
    Vector mean(d_, 0.0);
    for (std::size_t j = 0; j < n_; ++j)
      for (std::size_t a = 0; a < d_; ++a) mean[a] += clean(a, j) / static_cast<double>(n_);
    s.target = matvec(target_map_, mean);
  } else {
    s.input = clean;
    if (noise_ > 0.0) s.input += random_normal(d_, n_, noise_, rng_);
    s.target.assign(clean.col(0).begin(), clean.col(0).end());
  }
  return s;
}

std::vector<Sample> TaskGenerator::batch(std::size_t size) {
  std::vector<Sample> out;
  out.reserve(size);
  for (std::size_t i = 0; i < size; ++i) out.push_back(next());
  return out;
}

Vector readout_prediction(const Matrix& xd, const Matrix& readout) {
  Vector mean(xd.rows(), 0.0);
  for (std::size_t j = 0; j < xd.cols(); ++j)
    for (std::size_t a = 0; a < xd.rows(); ++a) mean[a] += xd(a, j);
  for (double& v : mean) v /= static_cast<double>(xd.cols());
  return matvec(readout, mean);
}

double sample_loss(const Matrix& xd, const Vector& target, const Matrix& readout) {
  const Vector pred = readout_prediction(xd, readout);
  if (pred.size() != target.size()) throw DimensionError("sample_loss: target length mismatch");
  double s = 0.0;
  for (std::size_t a = 0; a < pred.size(); ++a) s += (pred[a] - target[a]) * (pred[a] - target[a]);
  return s / static_cast<double>(pred.size());
}

Matrix sample_loss_gradient(const Matrix& xd, const Vector& target, const Matrix& readout) {
  const Vector pred = readout_prediction(xd, readout);
  Vector resid(pred.size());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t a = 0; a < pred.size(); ++a) resid[a] = scale * (pred[a] - target[a]);
  const Vector back = matvec(transpose(readout), resid);
  Matrix g(xd.rows(), xd.cols());
  const double inv_n = 1.0 / static_cast<double>(xd.cols());
  for (std::size_t j = 0; j < xd.cols(); ++j)
    for (std::size_t a = 0; a < xd.rows(); ++a) g(a, j) = back[a] * inv_n;
  return g;
}

bool is_divergent(double loss, double terminal_norm, double threshold) {
  return !std::isfinite(loss) || !std::isfinite(terminal_norm) || terminal_norm > threshold;
}

namespace {

void accumulate(std::vector<BlockParams>& into, std::vector<BlockParams>& from) {
  for (std::size_t i = 0; i < into.size(); ++i) {
    auto a = param_tensors(into[i]);
    auto b = param_tensors(from[i]);
    for (std::size_t t = 0; t < a.size(); ++t)
      for (std::size_t e = 0; e < a[t].values.size(); ++e) a[t].values[e] += b[t].values[e];
  }
}

}  // namespace

void sgd_step(std::vector<BlockParams>& params, std::vector<BlockParams>& velocity,
              std::vector<BlockParams>& grads, double lr, double momentum, double weight_decay) {
  if (velocity.size() != params.size() || grads.size() != params.size())
    throw DimensionError("sgd_step: params, velocity and grads differ in block count");
  const double decay = 1.0 - lr * weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = param_tensors(params[i]);
    auto v = param_tensors(velocity[i]);
    auto g = param_tensors(grads[i]);
    for (std::size_t t = 0; t < p.size(); ++t) {
      const double shrink = p[t].is_weight ? decay : 1.0;
      for (std::size_t e = 0; e < p[t].values.size(); ++e) {
        v[t].values[e] = momentum * v[t].values[e] + g[t].values[e];
        p[t].values[e] = shrink * p[t].values[e] - lr * v[t].values[e];
      }
    }
  }
}

TrialOutcome train_run(const TrainConfig& tc) {
  tc.validate();
  const ModelConfig& cfg = tc.model;
  RngStream init_rng(tc.seed, 0);
  std::vector<BlockParams> params = init_model(cfg, init_rng);
  std::vector<BlockParams> velocity;
  for (const auto& b : params) velocity.push_back(b.zeros_like());
  TaskGenerator gen(tc.task, cfg.d, cfg.n, tc.seed, tc.noise);
  RngStream probe_rng(tc.seed, 3);
  const Matrix probe = random_normal(cfg.d, cfg.n, 1.0, probe_rng);

  TrialOutcome out;
  auto checkpoint = [&](std::size_t step) {
    try {
      out.moment_curves.push_back({step, layer_moments(model_forward(probe, params, cfg))});
    } catch (const DivergenceError&) {
    }
  };
  auto diverge = [&](std::size_t step, double loss) {
    out.diverged = true;
    out.first_divergence_step = step;
    out.final_loss = loss;
    out.loss_curve.push_back(loss);
  };

  checkpoint(0);
  const double inv_batch = 1.0 / static_cast<double>(tc.batch_size);
  for (std::size_t step = 0; step < tc.steps; ++step) {
    const std::vector<Sample> batch = gen.batch(tc.batch_size);
    std::vector<BlockParams> grads;
    for (const auto& b : params) grads.push_back(b.zeros_like());
    double loss = 0.0;
    bool bad = false;
    for (const auto& s : batch) {
      ForwardTape tape;
      try {
        tape = model_forward(s.input, params, cfg);
      } catch (const DivergenceError&) {
        bad = true;
        break;
      }
      const double l = sample_loss(tape.output(), s.target, gen.readout());
      if (is_divergent(l, frobenius_norm(tape.output()), tc.divergence_threshold)) {
        bad = true;
        break;
      }
      loss += l * inv_batch;
      Matrix up = sample_loss_gradient(tape.output(), s.target, gen.readout());
      up *= inv_batch;
      ModelGradients g = param_gradients(tape, up);
      accumulate(grads, g.blocks);
    }
    if (bad) {
      diverge(step, std::numeric_limits<double>::infinity());
      break;
    }
    out.loss_curve.push_back(loss);
    out.final_loss = loss;

    sgd_step(params, velocity, grads, tc.lr, tc.momentum, tc.weight_decay);
    const std::size_t done = step + 1;
    if (done == tc.steps || (tc.checkpoint_every > 0 && done % tc.checkpoint_every == 0))
      checkpoint(done);
  }
  out.final_params = std::move(params);
  return out;
}

std::vector<TrialRecord> stability_trial(const TrainConfig& base,
                                         const std::vector<Placement>& placements,
                                         const std::vector<double>& weight_decays,
                                         const std::vector<std::uint64_t>& seeds,
                                         std::size_t threads) {
  base.validate();
  std::vector<TrialRecord> records;
  for (Placement p : placements)
    for (double wd : weight_decays)
      for (std::uint64_t s : seeds) records.push_back({p, wd, s, {}});
  parallel_for(records.size(), threads, [&](std::size_t i) {
    TrainConfig tc = base;
    tc.model.placement = records[i].placement;
    tc.weight_decay = records[i].weight_decay;
    tc.seed = records[i].seed;
    records[i].outcome = train_run(tc);
    records[i].outcome.final_params.clear();
  });
  return records;
}

std::vector<DivergenceCount> divergence_counts(const std::vector<TrialRecord>& records) {
  std::vector<DivergenceCount> out;
  for (const auto& r : records) {
    DivergenceCount* slot = nullptr;
    for (auto& c : out)
      if (c.placement == r.placement && c.weight_decay == r.weight_decay) slot = &c;
    if (!slot) {
      out.push_back({r.placement, r.weight_decay, 0, 0});
      slot = &out.back();
    }
    ++slot->runs;
    if (r.outcome.diverged) ++slot->diverged;
  }
  return out;
}

}  // namespace lnlab
