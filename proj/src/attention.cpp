#include "lnlab/attention.hpp"

#include <cmath>
#include <string>

#include "lnlab/error.hpp"
#include "lnlab/numerics.hpp"

namespace lnlab {

std::size_t AttentionParams::key_dim() const {
  if (heads.empty()) throw DomainError("attention: at least one head required");
  return heads.front().query.rows();
}

void AttentionParams::validate(std::size_t d) const {
  const std::size_t k = key_dim();
  for (std::size_t h = 0; h < heads.size(); ++h) {
    const auto& hd = heads[h];
    const bool ok = hd.query.rows() == k && hd.query.cols() == d && hd.key.rows() == k &&
                    hd.key.cols() == d && hd.value.rows() == k && hd.value.cols() == d &&
                    hd.out.rows() == d && hd.out.cols() == k;
    if (!ok)
      throw DimensionError("attention head " + std::to_string(h) + " shapes (Q " +
                           hd.query.shape_string() + ", K " + hd.key.shape_string() + ", V " +
                           hd.value.shape_string() + ", W " + hd.out.shape_string() +
                           ") do not match d=" + std::to_string(d) + ", k=" + std::to_string(k));
  }
}

AttentionParams AttentionParams::zeros_like() const {
  AttentionParams z;
  z.heads.reserve(heads.size());
  for (const auto& h : heads) {
    z.heads.push_back({Matrix(h.query.rows(), h.query.cols()), Matrix(h.key.rows(), h.key.cols()),
                       Matrix(h.value.rows(), h.value.cols()), Matrix(h.out.rows(), h.out.cols())});
  }
  return z;
}

namespace {

double inv_sqrt_k(const AttentionHead& h) {
  return 1.0 / std::sqrt(static_cast<double>(h.query.rows()));
}

}  // namespace

Matrix attention_probs(const Matrix& x, const AttentionHead& head) {
  const Matrix qx = matmul(head.query, x);
  const Matrix kx = matmul(head.key, x);
  Matrix scores = matmul(transpose(kx), qx);
  scores *= inv_sqrt_k(head);
  return softmax_columns(scores);
}

Matrix attn_forward(const Matrix& x, const AttentionParams& p) {
  if (!all_finite(x)) throw NonFiniteError("attn_forward: non-finite input");
  p.validate(x.rows());
  Matrix out(x.rows(), x.cols());
  for (const auto& head : p.heads) {
    const Matrix probs = attention_probs(x, head);
    const Matrix mixed = matmul(matmul(head.value, x), probs);
    out += matmul(head.out, mixed);
  }
  return out;
}

Matrix attn_jacobian(const Matrix& x, const AttentionParams& p, std::size_t i, std::size_t j) {
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  if (i >= n || j >= n)
    throw DomainError("attn_jacobian: token index out of range (i=" + std::to_string(i) +
                      ", j=" + std::to_string(j) + ", n=" + std::to_string(n) + ")");
  p.validate(d);
  Matrix block(d, d);
  for (const auto& head : p.heads) {
    const double scale = inv_sqrt_k(head);
    const Matrix probs = attention_probs(x, head);
    const auto a = probs.col(j);

    // ∂s/∂x_i (n×d): s_l = (K x_l)ᵀ(Q x_j)/√k.
    Matrix ds(n, d);
    if (i == j) ds = matmul(transpose(matmul(head.key, x)), head.query);
    const Vector qxj = matvec(head.query, x.col(j));
    const Vector kt_qxj = matvec(transpose(head.key), qxj);
    for (std::size_t c = 0; c < d; ++c) ds(i, c) += kt_qxj[c];
    ds *= scale;

    // (diag(a) − aaᵀ)·∂s/∂x_i
    Matrix da(n, d);
    for (std::size_t c = 0; c < d; ++c) {
      double weighted = 0.0;
      for (std::size_t l = 0; l < n; ++l) weighted += a[l] * ds(l, c);
      for (std::size_t l = 0; l < n; ++l) da(l, c) = a[l] * (ds(l, c) - weighted);
    }

    Matrix inner_block = matmul(x, da);
    for (std::size_t c = 0; c < d; ++c) inner_block(c, c) += a[i];
    block += matmul(matmul(head.out, head.value), inner_block);
  }
  return block;
}

Matrix attn_jacobian_full(const Matrix& x, const AttentionParams& p) {
  const std::size_t d = x.rows();
  const std::size_t n = x.cols();
  Matrix full(n * d, n * d);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const Matrix b = attn_jacobian(x, p, i, j);
      for (std::size_t c = 0; c < d; ++c)
        for (std::size_t r = 0; r < d; ++r) full(j * d + r, i * d + c) = b(r, c);
    }
  }
  return full;
}

Matrix attn_backward(const Matrix& x, const AttentionParams& p, const Matrix& grad_out,
                     AttentionParams& grads) {
  p.validate(x.rows());
  if (grad_out.rows() != x.rows() || grad_out.cols() != x.cols())
    throw DimensionError("attn_backward: gradient shape " + grad_out.shape_string() +
                         " vs state " + x.shape_string());
  if (grads.heads.size() != p.heads.size())
    throw DimensionError("attn_backward: gradient buffer head count mismatch");
  const std::size_t n = x.cols();
  const Matrix xt = transpose(x);
  Matrix dx(x.rows(), n);
  for (std::size_t h = 0; h < p.heads.size(); ++h) {
    const auto& head = p.heads[h];
    auto& g = grads.heads[h];
    const double scale = inv_sqrt_k(head);
    const Matrix qx = matmul(head.query, x);
    const Matrix kx = matmul(head.key, x);
    const Matrix vx = matmul(head.value, x);
    Matrix scores = matmul(transpose(kx), qx);
    scores *= scale;
    const Matrix probs = softmax_columns(scores);
    const Matrix mixed = matmul(vx, probs);

    g.out += matmul(grad_out, transpose(mixed));
    const Matrix d_mixed = matmul(transpose(head.out), grad_out);
    const Matrix d_vx = matmul(d_mixed, transpose(probs));
    const Matrix d_probs = matmul(transpose(vx), d_mixed);

    Matrix d_scores(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      double weighted = 0.0;
      for (std::size_t l = 0; l < n; ++l) weighted += probs(l, j) * d_probs(l, j);
      for (std::size_t l = 0; l < n; ++l) d_scores(l, j) = probs(l, j) * (d_probs(l, j) - weighted);
    }
    d_scores *= scale;

    const Matrix d_kx = matmul(qx, transpose(d_scores));
    const Matrix d_qx = matmul(kx, d_scores);
    g.value += matmul(d_vx, xt);
    g.key += matmul(d_kx, xt);
    g.query += matmul(d_qx, xt);
    dx += matmul(transpose(head.value), d_vx);
    dx += matmul(transpose(head.key), d_kx);
    dx += matmul(transpose(head.query), d_qx);
  }
  return dx;
}

}  // namespace lnlab
