#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbgam/diagnostics.hpp"

namespace sbgam {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  /// Short machine-readable category ("input", "config", ...).
  virtual const char* category() const noexcept { return "internal"; }
};

/// Bad user data: malformed CSV, constant covariate, response out of range.
class InputError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "input"; }
};

/// Invalid configuration: bandwidth outside (0, 1/2], unknown kernel, bad tolerances.
class ConfigError : public Error {
 public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

/// The local information weight vanished at a grid point (data too sparse for the bandwidth).
class DegenerateWeightError : public Error {
 public:
  DegenerateWeightError(std::size_t dim, double x, double value);
  const char* category() const noexcept override { return "degenerate_weight"; }
  std::size_t dim() const noexcept { return dim_; }
  double x() const noexcept { return x_; }

 private:
  std::size_t dim_;
  double x_;
};

/// An inner or outer iteration did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, FitDiagnostics diagnostics, double contraction = 0.0);
  const char* category() const noexcept override { return "convergence"; }
  const FitDiagnostics& diagnostics() const noexcept { return diagnostics_; }
  /// Estimated contraction ratio of the failing inner loop, if that is what failed.
  double contraction() const noexcept { return contraction_; }

 private:
  FitDiagnostics diagnostics_;
  double contraction_;
};

/// A library invariant was violated.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbgam
