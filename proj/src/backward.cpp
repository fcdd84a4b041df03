#include "lnlab/error.hpp"
#include "lnlab/model.hpp"

namespace lnlab {

namespace {

// Column-wise LN backward; accumulates γ/β gradients into `g`.
Matrix ln_backward_cols(const Matrix& x, const Matrix& grad_out, const LNParams& p, LNParams& g) {
  Matrix dx(x.rows(), x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j)
    dx.set_col(j, ln_backward(x.col(j), grad_out.col(j), p, g.gamma, g.beta));
  return dx;
}

Matrix sublayer_backward(const SublayerTape& t, const BlockParams& b, const ModelConfig& cfg,
                         Sublayer which, const Matrix& grad_out, BlockParams& g) {
  const Placement pl = cfg.placement;
  const LnSite in = which == Sublayer::Attention ? LnSite::AttnIn : LnSite::FfnIn;
  const LnSite out = which == Sublayer::Attention ? LnSite::AttnOut : LnSite::FfnOut;

  Matrix d_sum = pl == Placement::Post
                     ? ln_backward_cols(t.residual_sum, grad_out, *b.site(out), *g.site(out))
                     : grad_out;
  Matrix d_z = d_sum;
  d_z *= cfg.delta_t;
  if (pl == Placement::Peri) d_z = ln_backward_cols(t.raw, d_z, *b.site(out), *g.site(out));
  Matrix d_in = which == Sublayer::Attention ? attn_backward(t.normed_in, b.attn, d_z, g.attn)
                                             : ffn_backward(t.normed_in, b.ffn, d_z, g.ffn);
  if (pl == Placement::Pre || pl == Placement::Peri)
    d_in = ln_backward_cols(t.input, d_in, *b.site(in), *g.site(in));
  d_sum += d_in;
  return d_sum;
}

}  // namespace

ModelGradients param_gradients(const ForwardTape& tape, const Matrix& upstream) {
  const auto& cfg = tape.cfg;
  if (upstream.rows() != cfg.d || upstream.cols() != cfg.n)
    throw DimensionError("param_gradients: upstream " + upstream.shape_string() +
                         " does not match the state shape");
  if (!all_finite(upstream)) throw NonFiniteError("param_gradients: non-finite upstream");
  ModelGradients grads;
  grads.blocks.reserve(tape.depth());
  for (const auto& b : tape.params) grads.blocks.push_back(b.zeros_like());
  Matrix g = upstream;
  for (std::size_t i = tape.depth(); i-- > 0;) {
    const auto& bt = tape.blocks[i];
    g = sublayer_backward(bt.ffn, tape.params[i], cfg, Sublayer::Ffn, g, grads.blocks[i]);
    g = sublayer_backward(bt.attn, tape.params[i], cfg, Sublayer::Attention, g, grads.blocks[i]);
  }
  grads.input = std::move(g);
  return grads;
}

}  // namespace lnlab
