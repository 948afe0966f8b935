#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sbgam/family.hpp"
#include "sbgam/grid.hpp"
#include "sbgam/kernels.hpp"
#include "sbgam/nw_fit.hpp"
#include "sbgam/sim.hpp"

namespace sbgam {

enum class OracleOrder { constant = 0, linear = 1 };

/// Pointwise maximizer of the smoothed quasi-likelihood for d = 1 on the grid.
struct PointwiseCurve {
  Curve level;                 ///< theta_0(x_k) = eta0 + eta1(x_k)
  Curve slope;                 ///< d/dx on the rescaled axis (order 1 only)
  std::vector<bool> converged;  ///< false where Newton failed or the solution ran off to infinity

  bool all_converged() const;
};

/// Damped Newton at every grid point on sum_i q1(theta, Y^i) K_h(x_k, X^i) = 0 (order 0) or on the
/// two-parameter local-linear score system (order 1). Throws InputError unless d = 1.
PointwiseCurve pointwise_1d_oracle(const Dataset& data, const KernelSpec& kernel, const Grid& grid,
                                   const Family& fam, OracleOrder order);

/// Identity-link smooth backfitting solved as one dense constrained system.
struct LsqSbfSolution {
  double eta0 = 0.0;
  std::vector<Curve> components0;
  std::vector<Curve> components1;  ///< scaled slopes h_j eta0j' (local linear only)
};

/// Assembles the least-squares normal equations over the full product grid with the normalizing
/// constraints appended and solves them with a full-pivot LU. Throws InputError when singular and
/// ConfigError beyond d = 3 or 21 grid points.
LsqSbfSolution lsq_sbf_oracle(const Dataset& data, const KernelSpec& kernel, const Grid& grid, Estimator estimator);

using FieldFunction = std::function<double(std::span<const double>)>;
using CurveFunction = std::function<double(double)>;

/// Truth, design density and smoothing constants for the asymptotic formulas. Coordinates live on
/// the box [lo, hi]; delta_j is the bandwidth limit n^{1/5} h_j in the same units.
struct AsymptoticInputs {
  explicit AsymptoticInputs(Family fam) : family(std::move(fam)) {}

  Family family;
  std::vector<double> lo;
  std::vector<double> hi;
  double eta0 = 0.0;
  std::vector<CurveFunction> components;
  /// Analytic derivatives; central differences with step diff_step are used where empty.
  std::vector<CurveFunction> d1;
  std::vector<CurveFunction> d2;
  FieldFunction density;
  /// d/dx_j log p; central differences of log p when empty.
  std::function<double(std::size_t, std::span<const double>)> log_gradient;
  /// Var(Y | X = x); V(m(x)) when empty.
  FieldFunction conditional_variance;
  std::vector<double> delta;
  BaseKernel kernel = BaseKernel::epanechnikov;
  std::size_t quad_points = 40;
  double diff_step = 1e-4;

  std::size_t dims() const noexcept { return components.size(); }
  double predictor(std::span<const double> x) const;
  double component_d1(std::size_t j, double x) const;
  double component_d2(std::size_t j, double x) const;
  double log_density_gradient(std::size_t j, std::span<const double> x) const;
  /// w*(x) = psi(eta*(x)) p(x).
  double weight(std::span<const double> x) const;
  /// Throws ConfigError on inconsistent sizes, an empty box or non-positive delta.
  void validate() const;
};

/// Inputs for a built-in simulation model on [-1, 1]^d with analytic derivatives.
AsymptoticInputs simulation_inputs(const SimModel& model, std::vector<double> delta,
                                   BaseKernel kernel = BaseKernel::epanechnikov);

/// Oracle variance v_j(x_j) of the j-th component.
double oracle_variance(const AsymptoticInputs& in, std::size_t j, double xj);

/// Pointwise bias field of the Nadaraya-Watson fit before projection onto additive functions.
double nw_bias_field(const AsymptoticInputs& in, std::span<const double> x);

struct AdditiveProjection {
  double b0 = 0.0;
  std::vector<Curve> components;
  std::vector<std::vector<double>> points;  ///< box coordinates of the grid, per dimension
};

/// Minimizes int [field - b0 - sum_j f_j]^2 weight over the product grid mapped onto the box, subject to
/// int f_j w_j = 0.
AdditiveProjection project_additive(const FieldFunction& field, const FieldFunction& weight, const Grid& grid,
                                    std::span<const AffineMap> box);

/// Additive projection of nw_bias_field with weight w*.
AdditiveProjection nw_bias_projection(const AsymptoticInputs& in, const Grid& grid);

/// Intercept bias of the Nadaraya-Watson fit.
double nw_intercept_bias(const AsymptoticInputs& in);

/// Component bias of the local-linear fit, 0.5 delta_j^2 mu2 eta_j''(x_j).
double ll_bias(const AsymptoticInputs& in, std::size_t j, double xj);

/// Intercept bias of the local-linear fit.
double ll_intercept_bias(const AsymptoticInputs& in);

}  // namespace sbgam
