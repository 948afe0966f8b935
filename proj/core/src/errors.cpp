#include "sbgam/errors.hpp"

#include <sstream>
#include <utility>

namespace sbgam {

namespace {

std::string degenerate_message(std::size_t dim, double x, double value) {
  std::ostringstream os;
  os << "degenerate weight in dimension " << dim + 1 << " at x=" << x << " (marginal weight " << value
     << "); data too sparse for the bandwidth";
  return os.str();
}

}  // namespace

DegenerateWeightError::DegenerateWeightError(std::size_t dim, double x, double value)
    : Error(degenerate_message(dim, x, value)), dim_(dim), x_(x) {}

ConvergenceError::ConvergenceError(const std::string& what, FitDiagnostics diagnostics, double contraction)
    : Error(what), diagnostics_(std::move(diagnostics)), contraction_(contraction) {}

}  // namespace sbgam
