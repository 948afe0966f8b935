#include "sbgam/quadrature.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "sbgam/errors.hpp"

namespace sbgam {

GaussRule gauss_legendre(std::size_t n, double a, double b) {
  if (n == 0) throw ConfigError("Gauss-Legendre rule needs at least one node");
  const auto N = static_cast<Eigen::Index>(n);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(N);
  Eigen::VectorXd sub(std::max<Eigen::Index>(N - 1, 0));
  for (Eigen::Index k = 1; k < N; ++k) {
    const double kk = static_cast<double>(k);
    sub(k - 1) = kk / std::sqrt(4.0 * kk * kk - 1.0);
  }
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  if (n == 1) {
    rule.nodes[0] = mid;
    rule.weights[0] = 2.0 * half;
    return rule;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
  for (std::size_t k = 0; k < n; ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double v = solver.eigenvectors()(0, kk);
    rule.nodes[k] = mid + half * solver.eigenvalues()(kk);
    rule.weights[k] = 2.0 * v * v * half;
  }
  // Symmetrize to remove eigensolver noise.
  for (std::size_t k = 0; k < n / 2; ++k) {
    const std::size_t m = n - 1 - k;
    const double x = 0.5 * ((rule.nodes[m] - mid) - (rule.nodes[k] - mid));
    const double w = 0.5 * (rule.weights[k] + rule.weights[m]);
    rule.nodes[k] = mid - x;
    rule.nodes[m] = mid + x;
    rule.weights[k] = rule.weights[m] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = mid;
  return rule;
}

}  // namespace sbgam
