#pragma once

#include <cstddef>
#include <vector>

namespace sbgam {

/// Iteration record of one fit. Filled by both estimators.
struct FitDiagnostics {
  std::size_t outer_iterations = 0;
  /// Inner sweep count per outer step.
  std::vector<std::size_t> inner_sweeps;
  /// Sup-norm change per inner sweep, per outer step.
  std::vector<std::vector<double>> inner_change_norms;
  /// Ratio of the last two inner change norms, per outer step (0 when undefined).
  std::vector<double> inner_contraction;
  /// Relative sup-norm change of the additive predictor, per outer step.
  std::vector<double> outer_change_norms;
  /// Absolute sup norm of the Newton correction, per outer step.
  std::vector<double> step_sup_norms;
  /// Largest |normalizing constraint| / mass after each outer update.
  std::vector<double> constraint_residuals;
  /// Smoothed quasi-likelihood at the initializer (index 0) and after every outer step.
  std::vector<double> sq_history;
  /// Per-component normalizing constraint values at the returned fit.
  std::vector<double> final_constraint_residuals;
  double residual_norm = 0.0;
  double sq = 0.0;
  double mass = 0.0;
  bool converged = false;
};

}  // namespace sbgam
