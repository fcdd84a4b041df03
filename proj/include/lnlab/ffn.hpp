#pragma once

#include <cstddef>
#include <string>

#include "lnlab/matrix.hpp"

namespace lnlab {

enum class Activation { Tanh, Relu };

std::string to_string(Activation a);
Activation parse_activation(const std::string& name);

/// Token-wise two-layer MLP without biases: W2·φ(W1·X). W1 is m×d, W2 is d×m.
struct FfnParams {
  Matrix w1;
  Matrix w2;
  Activation activation = Activation::Tanh;

  void validate(std::size_t d) const;
  FfnParams zeros_like() const;
};

double activate(Activation a, double z);
/// φ′(z). Relu at exactly z = 0 throws DifferentiabilityError.
double activate_derivative(Activation a, double z);

Matrix ffn_forward(const Matrix& x, const FfnParams& p);

/// W2·diag(φ′(W1 x_j))·W1, rows = outputs (d×d).
Matrix ffn_jacobian(const Matrix& x, const FfnParams& p, std::size_t j);

/// Reverse-mode pass: returns dL/dX and accumulates into `grads`. Relu uses the
/// zero subgradient at the kink.
Matrix ffn_backward(const Matrix& x, const FfnParams& p, const Matrix& grad_out, FfnParams& grads);

}  // namespace lnlab
