#include "lnlab/ffn.hpp"

#include <cmath>

#include "lnlab/error.hpp"

namespace lnlab {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "relu"; }

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  throw DomainError("unknown activation '" + name + "' (expected tanh or relu)");
}

void FfnParams::validate(std::size_t d) const {
  if (w1.cols() != d || w2.rows() != d || w1.rows() != w2.cols())
    throw DimensionError("ffn: shapes W1 " + w1.shape_string() + ", W2 " + w2.shape_string() +
                         " do not compose for d=" + std::to_string(d));
}

FfnParams FfnParams::zeros_like() const {
  return {Matrix(w1.rows(), w1.cols()), Matrix(w2.rows(), w2.cols()), activation};
}

double activate(Activation a, double z) {
  return a == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

double activate_derivative(Activation a, double z) {
  if (a == Activation::Tanh) {
    const double t = std::tanh(z);
    return 1.0 - t * t;
  }
  if (z == 0.0)
    throw DifferentiabilityError(
        "relu is not differentiable at a zero pre-activation; use the tanh activation");
  return z > 0.0 ? 1.0 : 0.0;
}

Matrix ffn_forward(const Matrix& x, const FfnParams& p) {
  p.validate(x.rows());
  Matrix hidden = matmul(p.w1, x);
  for (double& v : hidden.data()) v = activate(p.activation, v);
  return matmul(p.w2, hidden);
}

Matrix ffn_jacobian(const Matrix& x, const FfnParams& p, std::size_t j) {
  p.validate(x.rows());
  if (j >= x.cols()) throw DomainError("ffn_jacobian: token index out of range");
  const Vector pre = matvec(p.w1, x.col(j));
  Matrix scaled = p.w1;
  for (std::size_t r = 0; r < pre.size(); ++r) {
    const double g = activate_derivative(p.activation, pre[r]);
    for (std::size_t c = 0; c < scaled.cols(); ++c) scaled(r, c) *= g;
  }
  return matmul(p.w2, scaled);
}

Matrix ffn_backward(const Matrix& x, const FfnParams& p, const Matrix& grad_out, FfnParams& grads) {
  p.validate(x.rows());
  if (grad_out.rows() != x.rows() || grad_out.cols() != x.cols())
    throw DimensionError("ffn_backward: gradient shape " + grad_out.shape_string() +
                         " vs state " + x.shape_string());
  const Matrix pre = matmul(p.w1, x);
  Matrix act = pre;
  for (double& v : act.data()) v = activate(p.activation, v);
  grads.w2 += matmul(grad_out, transpose(act));
  Matrix d_pre = matmul(transpose(p.w2), grad_out);
  for (std::size_t i = 0; i < d_pre.size(); ++i) {
    const double z = pre.data()[i];
    const double g = (p.activation == Activation::Relu && z == 0.0)
                         ? 0.0
                         : activate_derivative(p.activation, z);
    d_pre.data()[i] *= g;
  }
  grads.w1 += matmul(d_pre, transpose(x));
  return matmul(transpose(p.w1), d_pre);
}

}  // namespace lnlab
