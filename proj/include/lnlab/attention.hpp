#pragma once

#include <cstddef>
#include <vector>

#include "lnlab/matrix.hpp"

namespace lnlab {

/// One self-attention head: query/key/value are k×d, `out` (W) is d×k.
struct AttentionHead {
  Matrix query;
  Matrix key;
  Matrix value;
  Matrix out;
};

struct AttentionParams {
  std::vector<AttentionHead> heads;

  /// Shared head width k. Requires at least one head.
  std::size_t key_dim() const;
  /// Throws DimensionError unless every head is (k×d, k×d, k×d, d×k).
  void validate(std::size_t d) const;
  /// Same shapes, all zeros.
  AttentionParams zeros_like() const;
};

/// Σ_h W V X · softmax_columns((K X)ᵀ Q X / √k).
Matrix attn_forward(const Matrix& x, const AttentionParams& p);

/// Row-stochastic view of one head: probs(l, j) is the weight token j puts on token l.
Matrix attention_probs(const Matrix& x, const AttentionHead& head);

/// ∂[f_attn(X)]_j / ∂x_i, rows = outputs (d×d). Indices are 0-based.
Matrix attn_jacobian(const Matrix& x, const AttentionParams& p, std::size_t i, std::size_t j);

/// Full nd×nd Jacobian of vec(f_attn(X)) w.r.t. vec(X), assembled from the n² blocks.
Matrix attn_jacobian_full(const Matrix& x, const AttentionParams& p);

/// Reverse-mode pass: returns dL/dX and accumulates parameter gradients into `grads`
/// (which must have the shapes of `p`).
Matrix attn_backward(const Matrix& x, const AttentionParams& p, const Matrix& grad_out,
                     AttentionParams& grads);

}  // namespace lnlab
