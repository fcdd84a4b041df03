#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lnlab/matrix.hpp"
#include "lnlab/model.hpp"
#include "lnlab/numerics.hpp"
#include "lnlab/rng.hpp"

namespace lnlab {

enum class TaskKind { MeanRegression, NoisyCopy };

std::string to_string(TaskKind t);
/// Accepts mean-regression|noisy-copy.
TaskKind parse_task(const std::string& name);

struct TrainConfig {
  TaskKind task = TaskKind::MeanRegression;
  std::size_t steps = 200;
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  double divergence_threshold = 1e8;
  std::size_t batch_size = 4;
  /// Input noise scale of the noisy-copy task.
  double noise = 0.1;
  /// Moment curves are recorded at step 0, every `checkpoint_every` steps and at the end.
  std::size_t checkpoint_every = 50;
  ModelConfig model;

  void validate() const;
};

struct Sample {
  Matrix input;
  Vector target;
};

/// Reproducible stream of (input, target) pairs. Predictions are read out as
/// R·(token mean of X_D) with a fixed readout R (identity); loss is the mean
/// squared error over the d outputs.
class TaskGenerator {
 public:
  TaskGenerator(TaskKind kind, std::size_t d, std::size_t n, std::uint64_t seed, double noise);

  Sample next();
  std::vector<Sample> batch(std::size_t size);

  const Matrix& readout() const { return readout_; }
  /// Fixed target map of the mean-regression task (d×d).
  const Matrix& target_map() const { return target_map_; }

 private:
  TaskKind kind_;
  std::size_t d_;
  std::size_t n_;
  double noise_;
  Matrix readout_;
  Matrix target_map_;
  RngStream rng_;
};

/// R·(1/n)Σ_j x_j.
Vector readout_prediction(const Matrix& xd, const Matrix& readout);
/// (1/d)‖prediction − target‖².
double sample_loss(const Matrix& xd, const Vector& target, const Matrix& readout);
/// dLoss/dX_D for one sample.
Matrix sample_loss_gradient(const Matrix& xd, const Vector& target, const Matrix& readout);

/// Divergence predicate: non-finite loss or terminal norm above the threshold.
bool is_divergent(double loss, double terminal_norm, double threshold);

struct MomentCheckpoint {
  std::size_t step = 0;
  std::vector<Moments> layers;
};

struct TrialOutcome {
  bool diverged = false;
  std::optional<std::size_t> first_divergence_step;
  double final_loss = 0.0;
  std::vector<double> loss_curve;
  std::vector<MomentCheckpoint> moment_curves;
  /// Parameters after the last completed update.
  std::vector<BlockParams> final_params;
};

/// One optimizer update over every parameter tensor: m ← μ·m + g,
/// θ ← (1 − lr·λ)·θ − lr·m, with the decay factor applied to weights only.
void sgd_step(std::vector<BlockParams>& params, std::vector<BlockParams>& velocity,
              std::vector<BlockParams>& grads, double lr, double momentum, double weight_decay);

/// SGD with momentum and decoupled weight decay on the attention/FFN weights:
///   m ← μ·m + g;  θ ← (1 − lr·λ)·θ − lr·m.
/// γ and β follow the same update without decay. Halts at the first divergent step.
TrialOutcome train_run(const TrainConfig& tc);

struct TrialRecord {
  Placement placement = Placement::Peri;
  double weight_decay = 0.0;
  std::uint64_t seed = 0;
  TrialOutcome outcome;
};

/// Runs the placement × λ × seed grid with everything else fixed. Records come
/// back ordered by (placement, λ, seed) as given, independent of scheduling.
std::vector<TrialRecord> stability_trial(const TrainConfig& base,
                                         const std::vector<Placement>& placements,
                                         const std::vector<double>& weight_decays,
                                         const std::vector<std::uint64_t>& seeds,
                                         std::size_t threads);

struct DivergenceCount {
  Placement placement = Placement::Peri;
  double weight_decay = 0.0;
  std::size_t diverged = 0;
  std::size_t runs = 0;
};

std::vector<DivergenceCount> divergence_counts(const std::vector<TrialRecord>& records);

}  // namespace lnlab
