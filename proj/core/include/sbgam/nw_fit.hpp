#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sbgam/config.hpp"
#include "sbgam/diagnostics.hpp"
#include "sbgam/family.hpp"
#include "sbgam/grid.hpp"

namespace sbgam {

using Curve = std::vector<double>;

/// eta(x) = eta0 + sum_j components[j][k_j] on the product grid.
struct AdditivePredictor {
  double eta0 = 0.0;
  std::vector<Curve> components;

  static AdditivePredictor constant(double eta0, std::size_t dims, std::size_t points);
  std::size_t dims() const noexcept { return components.size(); }
  double at(std::span<const std::size_t> cell) const noexcept;
  /// Sup over the product grid of |eta|, computed from per-component extremes.
  double sup_norm() const;
};

/// Marginals of the local information weight -n^{-1} sum_i q2(eta(x), Y^i) K_h(x, X^i).
using WeightMarginals = MarginalSet;

struct NwMarginals {
  WeightMarginals weights;
  double score_total = 0.0;
  std::vector<Curve> score_curves;
  double sq = 0.0;  ///< smoothed quasi-likelihood at the same predictor
};

struct NwInnerResult {
  std::vector<Curve> xi;
  std::size_t sweeps = 0;
  double contraction = 0.0;
  std::vector<double> change_norms;
};

struct NwFit {
  double eta0 = 0.0;
  std::vector<Curve> components;
  FitDiagnostics diagnostics;

  AdditivePredictor predictor() const { return {eta0, components}; }
};

/// Smoothed quasi-likelihood of an additive predictor.
double smoothed_ql_nw(const AdditivePredictor& eta, const SmoothingContext& ctx, const Family& fam);

/// One streamed pass: weight marginals (total, curves, surfaces), score marginals and SQ.
/// Throws DegenerateWeightError if a weight curve drops below 1e-12 * mass / points.
NwMarginals nw_marginals(const AdditivePredictor& eta, const SmoothingContext& ctx, const Family& fam);

/// Gauss-Seidel backfitting of the linearized system from the centered xi_tilde start.
/// Throws ConvergenceError after cfg.max_inner sweeps.
NwInnerResult nw_inner_solve(const Grid& grid, const WeightMarginals& weights, double xi0,
                             const std::vector<Curve>& xi_tilde, const FitConfig& cfg);

/// Adds damping * (xi0, xi), evaluates the weight at the new sum and recenters every component against it.
/// The marginals at the updated predictor are returned through next when non-null.
AdditivePredictor nw_outer_update(const AdditivePredictor& prev, double xi0, const std::vector<Curve>& xi,
                                  const SmoothingContext& ctx, const Family& fam, double damping = 1.0,
                                  NwMarginals* next = nullptr);

/// Per-component constraint values sum_k w_k w_j(x_k) eta_j(x_k).
std::vector<double> nw_constraint_values(const AdditivePredictor& eta, const Grid& grid,
                                         const WeightMarginals& weights);

/// Norm of the score tuple: sqrt(score_total^2 + sum_j int (score_j / w_j)^2 w_j).
double nw_residual_norm(const AdditivePredictor& eta, const SmoothingContext& ctx, const Family& fam);
double nw_residual_norm(const Grid& grid, const NwMarginals& marginals);

/// Outer Newton iteration until the relative change of the additive predictor is below cfg.tol_outer.
/// Starts from the constant-model fit unless a start is given (cfg.initializer must then be user_supplied).
NwFit fit_nw(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg = {},
             const AdditivePredictor* start = nullptr);

/// Exactly `steps` outer iterations with no convergence test.
NwFit run_nw_steps(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg, std::size_t steps,
                   const AdditivePredictor* start = nullptr);

/// Constant-model start eta0 = g(mean y). Throws InputError if g(mean y) is not finite.
double constant_start(const Dataset& data, const Family& fam);

}  // namespace sbgam
