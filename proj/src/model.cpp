#include "lnlab/model.hpp"

#include <cmath>

#include "lnlab/error.hpp"

namespace lnlab {

std::string to_string(Placement p) {
  switch (p) {
    case Placement::Off: return "off";
    case Placement::Pre: return "pre";
    case Placement::Peri: return "peri";
    case Placement::Post: return "post";
  }
  return "?";
}

Placement parse_placement(const std::string& name) {
  if (name == "off") return Placement::Off;
  if (name == "pre") return Placement::Pre;
  if (name == "peri") return Placement::Peri;
  if (name == "post") return Placement::Post;
  throw DomainError("unknown placement '" + name + "' (expected off, pre, peri or post)");
}

std::string to_string(LnSite s) {
  switch (s) {
    case LnSite::AttnIn: return "attn_in";
    case LnSite::AttnOut: return "attn_out";
    case LnSite::FfnIn: return "ffn_in";
    case LnSite::FfnOut: return "ffn_out";
  }
  return "?";
}

bool site_active(Placement p, LnSite s) {
  const bool in_site = s == LnSite::AttnIn || s == LnSite::FfnIn;
  switch (p) {
    case Placement::Off: return false;
    case Placement::Pre: return in_site;
    case Placement::Peri: return true;
    case Placement::Post: return !in_site;
  }
  return false;
}

void ModelConfig::validate() const {
  if (d == 0 || n == 0 || k == 0 || m == 0 || heads == 0)
    throw DomainError("model config: d, n, k, m and heads must be positive");
  if (depth == 0) throw DomainError("model config: depth must be >= 1");
  if (!(delta_t > 0.0 && delta_t <= 1.0))
    throw DomainError("model config: delta_t must lie in (0, 1], got " + std::to_string(delta_t));
  if (!(epsilon >= 0.0)) throw DomainError("model config: epsilon must be >= 0");
  if (norm_kind == NormKind::LayerNorm && placement != Placement::Off && d < 2)
    throw DomainError("model config: LayerNorm needs d >= 2");
}

namespace {

constexpr LnSite kSites[] = {LnSite::AttnIn, LnSite::AttnOut, LnSite::FfnIn, LnSite::FfnOut};

LnSite in_site(Sublayer s) { return s == Sublayer::Attention ? LnSite::AttnIn : LnSite::FfnIn; }
LnSite out_site(Sublayer s) { return s == Sublayer::Attention ? LnSite::AttnOut : LnSite::FfnOut; }

Matrix apply_f(const Matrix& x, const BlockParams& b, Sublayer which) {
  return which == Sublayer::Attention ? attn_forward(x, b.attn) : ffn_forward(x, b.ffn);
}

Matrix normalize_tagged(const Matrix& x, const LNParams& p, std::size_t block, LnSite site) {
  try {
    return ln_forward(x, p);
  } catch (const DegenerateInputError& e) {
    throw DegenerateInputError(std::string(e.what()) + " at block " + std::to_string(block) +
                                   ", site " + to_string(site),
                               e.token(), block, to_string(site));
  }
}

// Dense block-diagonal LN Jacobian of a column-wise normalization.
Matrix ln_jacobian_full(const Matrix& x, const LNParams& p) {
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  Matrix full(n * d, n * d);
  for (std::size_t j = 0; j < n; ++j) {
    const Matrix b = ln_jacobian(x.col(j), p, j);
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t r = 0; r < d; ++r) full(j * d + r, j * d + c) = b(r, c);
  }
  return full;
}

Matrix ffn_jacobian_full(const Matrix& x, const FfnParams& p) {
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  Matrix full(n * d, n * d);
  for (std::size_t j = 0; j < n; ++j) {
    const Matrix b = ffn_jacobian(x, p, j);
    for (std::size_t c = 0; c < d; ++c)
      for (std::size_t r = 0; r < d; ++r) full(j * d + r, j * d + c) = b(r, c);
  }
  return full;
}

LNParams unit_site(const ModelConfig& cfg) {
  return LNParams::unit(cfg.d, cfg.epsilon, cfg.norm_kind);
}

}  // namespace

std::optional<LNParams>& BlockParams::site(LnSite s) {
  switch (s) {
    case LnSite::AttnIn: return attn_in;
    case LnSite::AttnOut: return attn_out;
    case LnSite::FfnIn: return ffn_in;
    case LnSite::FfnOut: return ffn_out;
  }
  return attn_in;
}

const std::optional<LNParams>& BlockParams::site(LnSite s) const {
  return const_cast<BlockParams*>(this)->site(s);
}

void BlockParams::validate(const ModelConfig& cfg) const {
  attn.validate(cfg.d);
  ffn.validate(cfg.d);
  for (LnSite s : kSites) {
    const auto& ln = site(s);
    const bool want = site_active(cfg.placement, s);
    if (want != ln.has_value())
      throw DomainError("block params: site " + to_string(s) + (want ? " missing" : " present") +
                        " for placement " + to_string(cfg.placement));
    if (ln && (ln->gamma.size() != cfg.d || ln->beta.size() != cfg.d))
      throw DimensionError("block params: site " + to_string(s) + " has wrong length");
  }
}

BlockParams BlockParams::zeros_like() const {
  BlockParams z{attn.zeros_like(), ffn.zeros_like(), {}, {}, {}, {}};
  for (LnSite s : kSites) {
    if (const auto& ln = site(s)) {
      LNParams p = *ln;
      p.gamma.assign(p.gamma.size(), 0.0);
      p.beta.assign(p.beta.size(), 0.0);
      z.site(s) = p;
    }
  }
  return z;
}

std::vector<ParamTensor> param_tensors(BlockParams& b) {
  std::vector<ParamTensor> out;
  for (std::size_t h = 0; h < b.attn.heads.size(); ++h) {
    auto& head = b.attn.heads[h];
    const std::string prefix = "attn.h" + std::to_string(h) + ".";
    out.push_back({prefix + "Q", head.query.data(), true});
    out.push_back({prefix + "K", head.key.data(), true});
    out.push_back({prefix + "V", head.value.data(), true});
    out.push_back({prefix + "W", head.out.data(), true});
  }
  out.push_back({"ffn.W1", b.ffn.w1.data(), true});
  out.push_back({"ffn.W2", b.ffn.w2.data(), true});
  for (LnSite s : kSites) {
    if (auto& ln = b.site(s)) {
      out.push_back({to_string(s) + ".gamma", ln->gamma, false});
      if (ln->kind == NormKind::LayerNorm) out.push_back({to_string(s) + ".beta", ln->beta, false});
    }
  }
  return out;
}

BlockParams init_block(const ModelConfig& cfg, RngStream& rng) {
  cfg.validate();
  const double sd = 1.0 / std::sqrt(static_cast<double>(cfg.d));
  const double sk = 1.0 / std::sqrt(static_cast<double>(cfg.k));
  const double sm = 1.0 / std::sqrt(static_cast<double>(cfg.m));
  BlockParams b;
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    AttentionHead head;
    head.query = random_normal(cfg.k, cfg.d, sd, rng);
    head.key = random_normal(cfg.k, cfg.d, sd, rng);
    head.value = random_normal(cfg.k, cfg.d, sd, rng);
    head.out = random_normal(cfg.d, cfg.k, sk, rng);
    b.attn.heads.push_back(std::move(head));
  }
  b.ffn.w1 = random_normal(cfg.m, cfg.d, sd, rng);
  b.ffn.w2 = random_normal(cfg.d, cfg.m, sm, rng);
  b.ffn.activation = cfg.activation;
  for (LnSite s : kSites)
    if (site_active(cfg.placement, s)) b.site(s) = unit_site(cfg);
  return b;
}

std::vector<BlockParams> init_model(const ModelConfig& cfg, RngStream& rng) {
  std::vector<BlockParams> params;
  params.reserve(cfg.depth);
  for (std::size_t i = 0; i < cfg.depth; ++i) params.push_back(init_block(cfg, rng));
  return params;
}

BlockParams zero_block(const ModelConfig& cfg) {
  cfg.validate();
  BlockParams b;
  for (std::size_t h = 0; h < cfg.heads; ++h)
    b.attn.heads.push_back({Matrix(cfg.k, cfg.d), Matrix(cfg.k, cfg.d), Matrix(cfg.k, cfg.d),
                            Matrix(cfg.d, cfg.k)});
  b.ffn = {Matrix(cfg.m, cfg.d), Matrix(cfg.d, cfg.m), cfg.activation};
  for (LnSite s : kSites)
    if (site_active(cfg.placement, s)) b.site(s) = unit_site(cfg);
  return b;
}

SublayerTape sublayer_forward(const Matrix& y, const BlockParams& b, const ModelConfig& cfg,
                              Sublayer which, std::size_t block_index) {
  SublayerTape t;
  t.input = y;
  const Placement pl = cfg.placement;
  const bool norm_in = pl == Placement::Pre || pl == Placement::Peri;
  t.normed_in = norm_in ? normalize_tagged(y, *b.site(in_site(which)), block_index, in_site(which))
                        : y;
  t.raw = apply_f(t.normed_in, b, which);
  t.normed_out = pl == Placement::Peri
                     ? normalize_tagged(t.raw, *b.site(out_site(which)), block_index, out_site(which))
                     : t.raw;
  t.residual_sum = y;
  for (std::size_t e = 0; e < y.size(); ++e)
    t.residual_sum.data()[e] = y.data()[e] + cfg.delta_t * t.normed_out.data()[e];
  t.output = pl == Placement::Post ? normalize_tagged(t.residual_sum, *b.site(out_site(which)),
                                                      block_index, out_site(which))
                                   : t.residual_sum;
  return t;
}

std::pair<Matrix, BlockTape> block_forward(const Matrix& x, const BlockParams& b,
                                           const ModelConfig& cfg, std::size_t block_index) {
  cfg.validate();
  if (x.rows() != cfg.d || x.cols() != cfg.n)
    throw DimensionError("block_forward: state " + x.shape_string() + " vs config " +
                         std::to_string(cfg.d) + "x" + std::to_string(cfg.n));
  b.validate(cfg);
  BlockTape tape;
  try {
    tape.attn = sublayer_forward(x, b, cfg, Sublayer::Attention, block_index);
    tape.ffn = sublayer_forward(tape.attn.output, b, cfg, Sublayer::Ffn, block_index);
  } catch (const NonFiniteError& e) {
    throw DivergenceError("non-finite hidden state in block " + std::to_string(block_index) +
                              ": " + e.what(),
                          block_index);
  }
  Matrix out = tape.ffn.output;
  return {std::move(out), std::move(tape)};
}

ForwardTape model_forward(const Matrix& x0, const std::vector<BlockParams>& params,
                          const ModelConfig& cfg) {
  cfg.validate();
  if (params.size() != cfg.depth)
    throw DimensionError("model_forward: " + std::to_string(params.size()) +
                         " blocks supplied for depth " + std::to_string(cfg.depth));
  if (!all_finite(x0)) throw DivergenceError("non-finite input state", 0);
  ForwardTape tape;
  tape.cfg = cfg;
  tape.params = params;
  tape.states.reserve(cfg.depth + 1);
  tape.blocks.reserve(cfg.depth);
  tape.states.push_back(x0);
  for (std::size_t i = 0; i < cfg.depth; ++i) {
    auto [next, bt] = block_forward(tape.states.back(), params[i], cfg, i);
    if (!all_finite(next))
      throw DivergenceError("non-finite hidden state after block " + std::to_string(i), i);
    tape.states.push_back(std::move(next));
    tape.blocks.push_back(std::move(bt));
  }
  return tape;
}

Matrix sublayer_sensitivity(const SublayerTape& t, const BlockParams& b, const ModelConfig& cfg,
                            Sublayer which) {
  const Placement pl = cfg.placement;
  Matrix jf = which == Sublayer::Attention ? attn_jacobian_full(t.normed_in, b.attn)
                                           : ffn_jacobian_full(t.normed_in, b.ffn);
  if (pl == Placement::Pre || pl == Placement::Peri)
    jf = matmul(jf, ln_jacobian_full(t.input, *b.site(in_site(which))));
  if (pl == Placement::Peri) jf = matmul(ln_jacobian_full(t.raw, *b.site(out_site(which))), jf);
  jf *= cfg.delta_t;
  for (std::size_t r = 0; r < jf.rows(); ++r) jf(r, r) += 1.0;
  if (pl == Placement::Post)
    jf = matmul(ln_jacobian_full(t.residual_sum, *b.site(out_site(which))), jf);
  return jf;
}

Matrix local_sensitivity(const ForwardTape& tape, std::size_t i) {
  if (i >= tape.depth())
    throw DomainError("local_sensitivity: block " + std::to_string(i) + " out of range (D=" +
                      std::to_string(tape.depth()) + ")");
  const auto& bt = tape.blocks[i];
  const auto& b = tape.params[i];
  const Matrix ja = sublayer_sensitivity(bt.attn, b, tape.cfg, Sublayer::Attention);
  const Matrix jf = sublayer_sensitivity(bt.ffn, b, tape.cfg, Sublayer::Ffn);
  return matmul(jf, ja);
}

Matrix gradient_product(const ForwardTape& tape, std::size_t i) {
  if (i >= tape.depth())
    throw DomainError("gradient_product: block " + std::to_string(i) + " out of range");
  Matrix prod = local_sensitivity(tape, i);
  for (std::size_t j = i + 1; j < tape.depth(); ++j) prod = matmul(local_sensitivity(tape, j), prod);
  return prod;
}

}  // namespace lnlab
