#pragma once

#include <cstddef>
#include <vector>

namespace sbgam {

/// Gauss-Legendre rule on [a, b].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const noexcept { return nodes.size(); }
};

/// n-point Gauss-Legendre rule from the Golub-Welsch eigenproblem. Throws ConfigError for n == 0.
GaussRule gauss_legendre(std::size_t n, double a = -1.0, double b = 1.0);

}  // namespace sbgam
