#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lnlab/model.hpp"
#include "lnlab/report.hpp"
#include "lnlab/training.hpp"

namespace lnlab {

enum class ModelInit { Random, Zero };

struct SweepConfig {
  std::vector<Placement> placements{Placement::Off, Placement::Pre, Placement::Peri};
  std::vector<double> weight_decays{0.0, 0.1};
  /// Seeds base_seed, base_seed + 1, … (count entries).
  std::size_t seed_count = 20;
};

struct DiagnosticsConfig {
  std::vector<std::string> suites{"growth", "datawise", "pathwise", "wasserstein", "pre_chain"};
  std::size_t instances = 20;
  double gradcheck_tolerance = 1e-6;
  double bound_slack = 1e-9;
  std::size_t datawise_samples = 64;
  std::size_t wasserstein_samples = 32;
  double wasserstein_p = 2.0;
};

/// Everything a CLI run needs. Every field has a default.
struct RunConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";
  ReportFormat format = ReportFormat::Csv;
  ModelInit init = ModelInit::Random;
  TrainConfig train;
  SweepConfig sweep;
  DiagnosticsConfig diagnostics;

  ModelConfig& model() { return train.model; }
  const ModelConfig& model() const { return train.model; }
};

/// Parses a JSON document. Unknown keys and ill-typed values throw ConfigError
/// naming the dotted field path; syntax errors name the line.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Round-trippable JSON text of a config (all fields).
std::string dump_run_config(const RunConfig& cfg);

}  // namespace lnlab
