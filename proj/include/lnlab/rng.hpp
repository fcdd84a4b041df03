#pragma once

#include <cstdint>

#include "lnlab/matrix.hpp"

namespace lnlab {

/// Reproducible random stream.
///
/// Algorithm (pinned): SplitMix64. The 64-bit state starts at
/// mix(seed) ^ mix(stream + 0x9E3779B97F4A7C15) and advances by the golden
/// gamma 0x9E3779B97F4A7C15; each output is mix(state) with the standard
/// SplitMix64 finalizer. Uniforms take the top 53 bits; normals use the
/// polar-free Box–Muller transform on two uniforms and cache the second
/// variate. Streams with distinct ids are statistically independent, so
/// parallel trials draw from `RngStream(seed, trial_index)`.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Standard normal.
  double normal();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

/// SplitMix64 finalizer.
std::uint64_t splitmix64_mix(std::uint64_t z);

/// Matrix with i.i.d. normal(0, stddev²) entries, filled column by column.
Matrix random_normal(std::size_t rows, std::size_t cols, double stddev, RngStream& rng);
/// Matrix with i.i.d. uniform [lo, hi) entries.
Matrix random_uniform(std::size_t rows, std::size_t cols, double lo, double hi, RngStream& rng);
Vector random_normal_vector(std::size_t n, double stddev, RngStream& rng);

}  // namespace lnlab
