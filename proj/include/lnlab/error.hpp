#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace lnlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not compose.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the documented domain (negative radius, empty set, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value reached an operation that requires finite input.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Normalization of a constant (LayerNorm) or zero (RMSNorm) token with epsilon = 0.
class DegenerateInputError : public Error {
 public:
  DegenerateInputError(std::string what, std::size_t token,
                       std::optional<std::size_t> block = std::nullopt,
                       std::string site = {})
      : Error(std::move(what)), token_(token), block_(block), site_(std::move(site)) {}

  std::size_t token() const noexcept { return token_; }
  std::optional<std::size_t> block() const noexcept { return block_; }
  const std::string& site() const noexcept { return site_; }

 private:
  std::size_t token_;
  std::optional<std::size_t> block_;
  std::string site_;
};

/// The activation is not differentiable at the evaluation point (relu kink).
class DifferentiabilityError : public Error {
 public:
  using Error::Error;
};

/// Iterative method ran out of iterations; carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(std::string what, double last_estimate)
      : Error(std::move(what)), last_estimate_(last_estimate) {}
  double last_estimate() const noexcept { return last_estimate_; }

 private:
  double last_estimate_;
};

/// A forward pass produced a non-finite hidden state.
class DivergenceError : public Error {
 public:
  DivergenceError(std::string what, std::size_t block)
      : Error(std::move(what)), block_(block) {}
  std::size_t block() const noexcept { return block_; }

 private:
  std::size_t block_;
};

/// Invalid run configuration; `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string what, std::string field)
      : Error(std::move(what)), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace lnlab
