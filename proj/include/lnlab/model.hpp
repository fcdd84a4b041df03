#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lnlab/attention.hpp"
#include "lnlab/ffn.hpp"
#include "lnlab/matrix.hpp"
#include "lnlab/normalization.hpp"
#include "lnlab/rng.hpp"

namespace lnlab {

enum class Placement { Off, Pre, Peri, Post };

std::string to_string(Placement p);
/// Accepts off|pre|peri|post.
Placement parse_placement(const std::string& name);

enum class Sublayer { Attention, Ffn };

enum class LnSite { AttnIn, AttnOut, FfnIn, FfnOut };

/// "attn_in", "attn_out", "ffn_in", "ffn_out".
std::string to_string(LnSite s);

/// Sites a placement activates. Post reuses the *_out sites for the LN applied
/// after the residual sum.
bool site_active(Placement p, LnSite s);

struct ModelConfig {
  std::size_t d = 4;
  std::size_t n = 3;
  std::size_t k = 3;
  std::size_t m = 8;
  std::size_t heads = 1;
  std::size_t depth = 4;
  Placement placement = Placement::Peri;
  double delta_t = 1.0;
  Activation activation = Activation::Tanh;
  double epsilon = kDefaultEpsilon;
  NormKind norm_kind = NormKind::LayerNorm;

  /// Throws DomainError on zero dimensions or delta_t outside (0, 1].
  void validate() const;
};

struct BlockParams {
  AttentionParams attn;
  FfnParams ffn;
  std::optional<LNParams> attn_in;
  std::optional<LNParams> attn_out;
  std::optional<LNParams> ffn_in;
  std::optional<LNParams> ffn_out;

  std::optional<LNParams>& site(LnSite s);
  const std::optional<LNParams>& site(LnSite s) const;

  /// Shapes match cfg and exactly the sites demanded by cfg.placement are present.
  void validate(const ModelConfig& cfg) const;
  /// Same structure with every weight, γ and β zeroed (ε and kind kept).
  BlockParams zeros_like() const;
};

/// A named view of one parameter tensor. `is_weight` is false for γ and β.
struct ParamTensor {
  std::string name;
  std::span<double> values;
  bool is_weight;
};

/// Every trainable tensor of a block in a fixed order.
std::vector<ParamTensor> param_tensors(BlockParams& b);

/// Random block: weights ~ normal(0, 1/√fan_in), γ = 𝟙, β = 0 on active sites.
BlockParams init_block(const ModelConfig& cfg, RngStream& rng);
std::vector<BlockParams> init_model(const ModelConfig& cfg, RngStream& rng);
/// All weights zero, γ = 𝟙, β = 0 on active sites.
BlockParams zero_block(const ModelConfig& cfg);

/// Intermediates of one residual sublayer:
///   normed_in  = LN_in(input)            (Pre, Peri; else = input)
///   raw        = f(normed_in)
///   normed_out = LN_out(raw)             (Peri; else = raw)
///   residual_sum = input + Δt·normed_out
///   output     = LN_post(residual_sum)   (Post; else = residual_sum)
struct SublayerTape {
  Matrix input;
  Matrix normed_in;
  Matrix raw;
  Matrix normed_out;
  Matrix residual_sum;
  Matrix output;
};

struct BlockTape {
  SublayerTape attn;
  SublayerTape ffn;
};

/// Immutable record of one forward pass. states[0] = X_0, states[D] = X_D.
struct ForwardTape {
  ModelConfig cfg;
  std::vector<BlockParams> params;
  std::vector<Matrix> states;
  std::vector<BlockTape> blocks;

  const Matrix& output() const { return states.back(); }
  std::size_t depth() const { return blocks.size(); }
};

/// One placement-wrapped residual sublayer. Degenerate LN inputs are rethrown
/// tagged with `block_index` and the site name.
SublayerTape sublayer_forward(const Matrix& y, const BlockParams& b, const ModelConfig& cfg,
                              Sublayer which, std::size_t block_index = 0);

/// Attention sublayer followed by the FFN sublayer.
std::pair<Matrix, BlockTape> block_forward(const Matrix& x, const BlockParams& b,
                                           const ModelConfig& cfg, std::size_t block_index = 0);

/// Runs all blocks. A non-finite state throws DivergenceError naming the block.
ForwardTape model_forward(const Matrix& x0, const std::vector<BlockParams>& params,
                          const ModelConfig& cfg);

/// ∂vec(sublayer output)/∂vec(sublayer input), nd×nd, column-major vec.
Matrix sublayer_sensitivity(const SublayerTape& t, const BlockParams& b, const ModelConfig& cfg,
                            Sublayer which);

/// ∂vec(X_{i+1})/∂vec(X_i).
Matrix local_sensitivity(const ForwardTape& tape, std::size_t i);

/// ∂vec(X_D)/∂vec(X_i) = L_{D−1}···L_i.
Matrix gradient_product(const ForwardTape& tape, std::size_t i);

struct ModelGradients {
  /// Same structure as the tape's params; inactive sites stay empty.
  std::vector<BlockParams> blocks;
  /// dG/dX_0.
  Matrix input;
};

/// Reverse-mode gradients of a scalar G given upstream = dG/dX_D (d×n).
ModelGradients param_gradients(const ForwardTape& tape, const Matrix& upstream);

/// Output of the attention-only, single-head RMS chain
///   X_{i+1} = X_i + Δt·W_i·N_i(X_i)·A_i,   N_i(x_j) = γ_i ⊙ x_j / ‖x_j‖₂.
struct PreChainResult {
  std::vector<Matrix> states;
  /// 1 + Δt·√n·‖γ_i‖∞·max_j ‖x_{i,j}‖₂⁻¹·‖W_i‖₂ per layer.
  std::vector<double> factors;
  double mean_abs = 0.0;
  /// (1/√(nd))·Π factors·‖X_0‖_F.
  double bound_rhs = 0.0;

  const Matrix& output() const { return states.back(); }
};

/// Runs the simplified chain. `queries`/`keys` hold per-layer k×d matrices for
/// softmax attention on the normalized tokens; leave both empty for uniform
/// attention. A zero token column throws DegenerateInputError.
PreChainResult simplified_pre_chain(const Matrix& x0, std::span<const Matrix> weights,
                                    std::span<const Vector> gammas,
                                    std::span<const Matrix> queries = {},
                                    std::span<const Matrix> keys = {}, double delta_t = 1.0);

}  // namespace lnlab
