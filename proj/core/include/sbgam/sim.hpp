#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sbgam/config.hpp"
#include "sbgam/family.hpp"
#include "sbgam/grid.hpp"
#include "sbgam/kernels.hpp"
#include "sbgam/nw_fit.hpp"

namespace sbgam {

enum class ResponseModel { bernoulli, poisson };
enum class CovariateModel { independent, correlated };
enum class Estimator { nw, ll };

std::string_view to_string(ResponseModel r);
std::string_view to_string(CovariateModel c);
std::string_view to_string(Estimator e);
ResponseModel parse_response_model(std::string_view name);
CovariateModel parse_covariate_model(std::string_view name);
Estimator parse_estimator(std::string_view name);

/// Simulation model on [-1, 1]^d. The first two covariates follow a bivariate normal truncated to
/// [-1, 1]^2 (rho 0 or 0.9 before truncation); extra covariates are U(-1, 1). The linear predictor is
/// sin(pi x1) + 0.5 (x2 + sin(pi x2)) + 0.1 (x3 + ... + xd).
struct SimModel {
  ResponseModel response = ResponseModel::bernoulli;
  CovariateModel covariate = CovariateModel::independent;
  std::size_t extra_dims = 0;
  std::size_t n = 100;
  std::uint64_t seed = 1;

  /// Model (i, j): i = 1 Bernoulli, 2 Poisson; j = 1 independent, 2 correlated.
  static SimModel table(int i, int j, std::size_t n, std::uint64_t seed = 1, std::size_t extra_dims = 0);
  std::size_t dims() const noexcept { return 2 + extra_dims; }
  double rho() const noexcept { return covariate == CovariateModel::correlated ? 0.9 : 0.0; }
  /// "(i,j)" label, with "+e" appended for extra dimensions.
  std::string label() const;
  Family family() const;
  /// Throws ConfigError if n < 10.
  void validate() const;
};

/// Uncentered truth component j and its first two derivatives on the original scale.
double truth_raw(std::size_t j, double x);
double truth_raw_d1(std::size_t j, double x);
double truth_raw_d2(std::size_t j, double x);

/// Truncated-normal (times uniform) covariate density on [-1, 1]^d and its log-gradient.
class CovariateDensity {
 public:
  explicit CovariateDensity(const SimModel& model);
  std::size_t dims() const noexcept { return dims_; }
  double operator()(std::span<const double> x) const;
  double log_gradient(std::size_t j, std::span<const double> x) const;
  /// Probability that the untruncated pair lands in [-1, 1]^2.
  double acceptance() const noexcept { return acceptance_; }

 private:
  std::size_t dims_;
  double rho_;
  double acceptance_;
};

/// Truth centered so that int eta_j* w* = 0 with w* = psi(eta*) p.
struct TruthComponents {
  double eta0 = 0.0;
  std::vector<double> centering;  ///< subtracted constants c_j
  std::vector<double> published;  ///< reference constants for the two leading components (empty if none)
  double published_eta0 = 0.0;

  double component(std::size_t j, double x) const { return truth_raw(j, x) - centering.at(j); }
  double predictor(std::span<const double> x) const;
};

/// Centering constants by tensor Gauss-Legendre quadrature (`points` nodes on each leading axis,
/// `extra_points` on each extra axis).
TruthComponents true_components(const SimModel& model, std::size_t points = 64, std::size_t extra_points = 12);

/// Curves of the centered truth on the original-scale reporting grid (-1 + 2 x_k).
std::vector<Curve> truth_curves(const TruthComponents& truth, std::size_t dims, const Grid& grid);

std::mt19937_64 make_rng(std::uint64_t master, std::uint64_t stream);

Eigen::MatrixXd gen_covariates(const SimModel& model, std::mt19937_64& rng);
Eigen::VectorXd gen_response(const SimModel& model, const Eigen::MatrixXd& covariates, std::mt19937_64& rng);

struct SimulatedData {
  Eigen::MatrixXd x;  ///< original scale
  Eigen::VectorXd y;
};

/// One dataset for replication `rep` of the model seed.
SimulatedData simulate(const SimModel& model, std::uint64_t rep = 0);

/// Rescales with the known bounds [-1, 1] so the fit grid lines up with the reporting grid.
Dataset to_unit_dataset(const SimulatedData& sim);

struct BandwidthRule {
  double factor = 1.0;  ///< c in h_j = c sd(X_j) n^{-1/5} on the rescaled axis
  std::optional<std::vector<double>> fixed;  ///< rescaled bandwidths for the leading components
  double extra = 0.1;  ///< rescaled bandwidth of every extra dimension

  /// Throws ConfigError if a resulting bandwidth falls outside (0, 1/2].
  std::vector<double> bandwidths(const Dataset& data, std::size_t leading = 2) const;
};

/// Exposed-h fixture for the simulation studies: 0.45 (n / 100)^{-1/5} on the rescaled axis.
double fixture_bandwidth(std::size_t n);

/// Rule with the fixture bandwidth on both leading components.
BandwidthRule fixture_rule(std::size_t n);

struct StudyConfig {
  Estimator estimator = Estimator::nw;
  std::size_t reps = 200;
  BaseKernel kernel = BaseKernel::epanechnikov;
  std::size_t grid_points = 41;
  FitConfig fit;
  BandwidthRule bandwidth;
  double bad_threshold = 50.0;
  /// Ends of the metric integration range as a fraction of the axis (central 90% by default).
  double metric_fraction = 0.9;
  std::size_t threads = 0;  ///< 0 uses the hardware concurrency
};

/// One replication: fitted curves on the reporting grid and the squared distance to the truth.
struct ReplicationOutcome {
  bool failed = false;
  bool bad = false;
  std::string error;
  double eta0 = 0.0;
  std::vector<Curve> components;
  std::vector<double> bandwidths;
  double distance2 = 0.0;
  std::size_t outer_iterations = 0;
};

ReplicationOutcome run_replication(const SimModel& model, std::uint64_t rep, const StudyConfig& cfg,
                                   const TruthComponents& truth);

/// Unweighted squared L2 distance over [-1, 1]^d between two additive predictors given on the grid.
double additive_distance2(double a0, const std::vector<Curve>& a, double b0, const std::vector<Curve>& b,
                          const Grid& grid);

struct ComponentMetrics {
  double isb = 0.0;
  double iv = 0.0;
  double mise = 0.0;
};

struct StudyResult {
  SimModel model;
  Estimator estimator = Estimator::nw;
  std::size_t reps = 0;
  std::size_t reps_used = 0;
  std::size_t bad_count = 0;     ///< includes failed fits
  std::size_t failed_count = 0;  ///< fits that raised an error
  std::vector<ComponentMetrics> components;
  double isb = 0.0;  ///< averaged over the first two components
  double iv = 0.0;
  double mise = 0.0;
  std::vector<double> report_grid;  ///< original-scale points
  std::vector<Curve> mean_curves;
  std::vector<Curve> truth_curves;
  TruthComponents truth;
  double mean_bandwidth = 0.0;  ///< average rescaled bandwidth of the first component
};

/// Replications in parallel, aggregated in replication order. Throws ConvergenceError if every fit is bad.
StudyResult run_study(const SimModel& model, const StudyConfig& cfg);

/// Trapezoid integral over the indices whose original-scale point lies in [-fraction, fraction].
double central_integral(const Grid& grid, std::span<const double> values, double fraction);

}  // namespace sbgam
