#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace splitcem {

/// Invalid user input: grid sizes, preset names, file contents, run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical procedure could not deliver its postcondition (factorization
/// breakdown, rank-deficient constraints, loss of ellipticity, ...).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what,
                          double residual = std::numeric_limits<double>::quiet_NaN())
      : std::runtime_error(what), residual_(residual) {}

  /// Last achieved residual, NaN when not applicable.
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Nonlinear iteration failed (iteration cap or divergence guard).
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : NumericalError(what, residual), iterations_(iterations) {}

  int iterations() const noexcept { return iterations_; }

 private:
  int iterations_;
};

}  // namespace splitcem
