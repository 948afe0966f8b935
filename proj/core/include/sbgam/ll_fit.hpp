#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "sbgam/config.hpp"
#include "sbgam/diagnostics.hpp"
#include "sbgam/family.hpp"
#include "sbgam/grid.hpp"
#include "sbgam/nw_fit.hpp"

namespace sbgam {

/// Local-linear predictor eta(X^i, x) = eta00 + sum_j [eta0j(x_j) + z_ij eta_j(x_j)], z_ij = (X^i_j - x_j) / h_j.
/// components1 holds the scaled derivative curves h_j * eta0j'.
struct LlPredictor {
  double eta00 = 0.0;
  std::vector<Curve> components0;
  std::vector<Curve> components1;

  static LlPredictor constant(double eta00, std::size_t dims, std::size_t points);
  std::size_t dims() const noexcept { return components0.size(); }
  /// Level part eta00 + sum_j eta0j(x_j).
  double level(std::span<const std::size_t> cell) const noexcept;
};

/// Value of the local-linear predictor for sample i at a grid cell.
double ll_predictor_eval(const LlPredictor& eta, const SmoothingContext& ctx, std::size_t sample,
                         std::span<const std::size_t> cell);

/// Marginals of V(x) = X(x)^T (n^{-1} diag w^i) X(x) with w^i = -q2(eta(X^i, x), Y^i) K_h(x, X^i).
struct LlWeightMarginals {
  /// Ordered-pair block M_{j,l}(x_j, x_l) = [[V00, V0l], [V0j, Vjl]] indexed (k_j, k_l).
  struct Block {
    Eigen::MatrixXd a00;
    Eigen::MatrixXd a01;
    Eigen::MatrixXd a10;
    Eigen::MatrixXd a11;
  };

  double mass = 0.0;
  std::vector<Curve> v00;  ///< V00,j(x_j)
  std::vector<Curve> v01;  ///< V0j,j(x_j)
  std::vector<Curve> v11;  ///< Vjj,j(x_j)
  std::vector<Block> blocks;  ///< d(d-1) ordered pairs

  std::size_t dims() const noexcept { return v00.size(); }
  static std::size_t block_index(std::size_t j, std::size_t l, std::size_t dims) noexcept;
  const Block& block(std::size_t j, std::size_t l) const;
};

struct LlMarginals {
  LlWeightMarginals weights;
  std::vector<Curve> zeta0;
  std::vector<Curve> zeta1;
  double score00 = 0.0;
  double sq = 0.0;
};

struct LlInnerResult {
  double xi00 = 0.0;
  std::vector<Curve> xi0;
  std::vector<Curve> xi1;
  std::size_t sweeps = 0;
  double contraction = 0.0;
  std::vector<double> change_norms;
};

struct LlFit {
  double eta00 = 0.0;
  std::vector<Curve> components0;
  std::vector<Curve> components1;  ///< scaled derivatives h_j * eta0j'
  std::vector<double> bandwidths;
  FitDiagnostics diagnostics;

  LlPredictor predictor() const { return {eta00, components0, components1}; }
  /// Unscaled derivative eta0j' on the rescaled axis.
  Curve derivative(std::size_t j) const;
};

double smoothed_ql_ll(const LlPredictor& eta, const SmoothingContext& ctx, const Family& fam);

/// One streamed pass: V marginals, score curves zeta0/zeta1, score00 and SQ.
/// Throws DegenerateWeightError if some M_j(x_j) has smallest eigenvalue below 1e-12 * mass.
LlMarginals ll_marginals(const LlPredictor& eta, const SmoothingContext& ctx, const Family& fam);

/// Gauss-Seidel sweeps of the 2x2 blocks, from the centered projection-normalized start.
LlInnerResult ll_inner_solve(const Grid& grid, const LlWeightMarginals& weights, const std::vector<Curve>& zeta0,
                             const std::vector<Curve>& zeta1, double score00, const FitConfig& cfg);

/// Adds damping * xi, evaluates the weight at the new predictor and recenters the level curves.
LlPredictor ll_outer_update(const LlPredictor& prev, const LlInnerResult& xi, const SmoothingContext& ctx,
                            const Family& fam, double damping = 1.0, LlMarginals* next = nullptr);

/// Per-component constraint values int [V00,j eta0j + V0j,j eta_j] dx_j.
std::vector<double> ll_constraint_values(const LlPredictor& eta, const Grid& grid, const LlWeightMarginals& weights);

/// sqrt(score00^2 + sum_j int zeta_j^T M_j^{-1} zeta_j).
double ll_residual_norm(const Grid& grid, const LlMarginals& marginals);

LlFit fit_ll(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg = {},
             const LlPredictor* start = nullptr);

/// Exactly `steps` outer iterations with no convergence test.
LlFit run_ll_steps(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg, std::size_t steps,
                   const LlPredictor* start = nullptr);

}  // namespace sbgam
