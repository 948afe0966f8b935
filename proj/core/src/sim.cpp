#include "sbgam/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>
#include <utility>

#include "sbgam/errors.hpp"
#include "sbgam/ll_fit.hpp"
#include "sbgam/quadrature.hpp"

namespace sbgam {

std::string_view to_string(ResponseModel r) { return r == ResponseModel::bernoulli ? "bernoulli" : "poisson"; }
std::string_view to_string(CovariateModel c) {
  return c == CovariateModel::independent ? "independent" : "correlated";
}
std::string_view to_string(Estimator e) { return e == Estimator::nw ? "nw" : "ll"; }

ResponseModel parse_response_model(std::string_view name) {
  if (name == "bernoulli" || name == "1") return ResponseModel::bernoulli;
  if (name == "poisson" || name == "2") return ResponseModel::poisson;
  throw ConfigError("unknown response model '" + std::string(name) + "'");
}

CovariateModel parse_covariate_model(std::string_view name) {
  if (name == "independent" || name == "1") return CovariateModel::independent;
  if (name == "correlated" || name == "2") return CovariateModel::correlated;
  throw ConfigError("unknown covariate model '" + std::string(name) + "'");
}

Estimator parse_estimator(std::string_view name) {
  if (name == "nw") return Estimator::nw;
  if (name == "ll") return Estimator::ll;
  throw ConfigError("unknown estimator '" + std::string(name) + "'");
}

SimModel SimModel::table(int i, int j, std::size_t n, std::uint64_t seed, std::size_t extra_dims) {
  if ((i != 1 && i != 2) || (j != 1 && j != 2)) throw ConfigError("model indices must be 1 or 2");
  SimModel m;
  m.response = i == 1 ? ResponseModel::bernoulli : ResponseModel::poisson;
  m.covariate = j == 1 ? CovariateModel::independent : CovariateModel::correlated;
  m.extra_dims = extra_dims;
  m.n = n;
  m.seed = seed;
  return m;
}

std::string SimModel::label() const {
  std::string s = "(" + std::string(response == ResponseModel::bernoulli ? "1" : "2") + "," +
                  std::string(covariate == CovariateModel::independent ? "1" : "2") + ")";
  if (extra_dims > 0) s += "+" + std::to_string(extra_dims);
  return s;
}

Family SimModel::family() const {
  return response == ResponseModel::bernoulli ? Family::bernoulli_logit() : Family::poisson_log();
}

void SimModel::validate() const {
  if (n < 10) throw ConfigError("simulation sample size must be at least 10");
}

double truth_raw(std::size_t j, double x) {
  using std::numbers::pi;
  if (j == 0) return std::sin(pi * x);
  if (j == 1) return 0.5 * (x + std::sin(pi * x));
  return 0.1 * x;
}

double truth_raw_d1(std::size_t j, double x) {
  using std::numbers::pi;
  if (j == 0) return pi * std::cos(pi * x);
  if (j == 1) return 0.5 * (1.0 + pi * std::cos(pi * x));
  return 0.1;
}

double truth_raw_d2(std::size_t j, double x) {
  using std::numbers::pi;
  if (j == 0) return -pi * pi * std::sin(pi * x);
  if (j == 1) return -0.5 * pi * pi * std::sin(pi * x);
  return 0.0;
}

namespace {

double normal_pair_density(double x1, double x2, double rho) {
  const double s = 1.0 - rho * rho;
  const double q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / s;
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(s));
}

}  // namespace

CovariateDensity::CovariateDensity(const SimModel& model) : dims_(model.dims()), rho_(model.rho()) {
  const GaussRule rule = gauss_legendre(64);
  double mass = 0.0;
  for (std::size_t a = 0; a < rule.size(); ++a) {
    for (std::size_t b = 0; b < rule.size(); ++b) {
      mass += rule.weights[a] * rule.weights[b] * normal_pair_density(rule.nodes[a], rule.nodes[b], rho_);
    }
  }
  acceptance_ = mass;
}

double CovariateDensity::operator()(std::span<const double> x) const {
  for (double v : x) {
    if (v < -1.0 || v > 1.0) return 0.0;
  }
  return normal_pair_density(x[0], x[1], rho_) / acceptance_ * std::pow(0.5, static_cast<double>(dims_ - 2));
}

double CovariateDensity::log_gradient(std::size_t j, std::span<const double> x) const {
  const double s = 1.0 - rho_ * rho_;
  if (j == 0) return -(x[0] - rho_ * x[1]) / s;
  if (j == 1) return -(x[1] - rho_ * x[0]) / s;
  return 0.0;
}

double TruthComponents::predictor(std::span<const double> x) const {
  double u = eta0;
  for (std::size_t j = 0; j < x.size(); ++j) u += component(j, x[j]);
  return u;
}

TruthComponents true_components(const SimModel& model, std::size_t points, std::size_t extra_points) {
  const std::size_t d = model.dims();
  const Family fam = model.family();
  const CovariateDensity density(model);
  std::vector<GaussRule> rules;
  for (std::size_t j = 0; j < d; ++j) rules.push_back(gauss_legendre(j < 2 ? points : extra_points));

  std::vector<double> moments(d, 0.0);
  double mass = 0.0;
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> x(d);
  while (true) {
    double w = 1.0;
    double eta = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      x[j] = rules[j].nodes[idx[j]];
      w *= rules[j].weights[idx[j]];
      eta += truth_raw(j, x[j]);
    }
    const double ws = w * fam.psi(eta) * density(x);
    mass += ws;
    for (std::size_t j = 0; j < d; ++j) moments[j] += ws * truth_raw(j, x[j]);
    std::size_t j = d;
    bool done = true;
    while (j > 0) {
      --j;
      if (++idx[j] < rules[j].size()) {
        done = false;
        break;
      }
      idx[j] = 0;
    }
    if (done) break;
  }

  TruthComponents t;
  t.centering.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    t.centering[j] = moments[j] / mass;
    t.eta0 += t.centering[j];
  }
  if (model.extra_dims == 0) {
    if (model.response == ResponseModel::bernoulli) {
      t.published = {0.0, 0.0};
      t.published_eta0 = 0.0;
    } else if (model.covariate == CovariateModel::independent) {
      t.published = {0.4533, 0.3230};
      t.published_eta0 = 0.7763;
    } else {
      t.published = {0.5874, 0.4536};
      t.published_eta0 = 1.0410;
    }
  }
  return t;
}

std::vector<Curve> truth_curves(const TruthComponents& truth, std::size_t dims, const Grid& grid) {
  std::vector<Curve> out(dims, Curve(grid.size()));
  for (std::size_t j = 0; j < dims; ++j) {
    for (std::size_t k = 0; k < grid.size(); ++k) out[j][k] = truth.component(j, -1.0 + 2.0 * grid.point(k));
  }
  return out;
}

std::mt19937_64 make_rng(std::uint64_t master, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Eigen::MatrixXd gen_covariates(const SimModel& model, std::mt19937_64& rng) {
  model.validate();
  const auto n = static_cast<Eigen::Index>(model.n);
  const auto d = static_cast<Eigen::Index>(model.dims());
  const double rho = model.rho();
  const double tail = std::sqrt(1.0 - rho * rho);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    double x1 = 0.0;
    double x2 = 0.0;
    do {
      const double z1 = normal(rng);
      const double z2 = normal(rng);
      x1 = z1;
      x2 = rho * z1 + tail * z2;
    } while (std::abs(x1) > 1.0 || std::abs(x2) > 1.0);
    x(i, 0) = x1;
    x(i, 1) = x2;
    for (Eigen::Index j = 2; j < d; ++j) x(i, j) = uniform(rng);
  }
  return x;
}

Eigen::VectorXd gen_response(const SimModel& model, const Eigen::MatrixXd& covariates, std::mt19937_64& rng) {
  const Family fam = model.family();
  Eigen::VectorXd y(covariates.rows());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (Eigen::Index i = 0; i < covariates.rows(); ++i) {
    double eta = 0.0;
    for (Eigen::Index j = 0; j < covariates.cols(); ++j) eta += truth_raw(static_cast<std::size_t>(j), covariates(i, j));
    const double m = fam.inverse_link(eta);
    if (model.response == ResponseModel::bernoulli) {
      y(i) = unit(rng) < m ? 1.0 : 0.0;
    } else {
      std::poisson_distribution<long> poisson(m);
      y(i) = static_cast<double>(poisson(rng));
    }
  }
  return y;
}

SimulatedData simulate(const SimModel& model, std::uint64_t rep) {
  auto rng = make_rng(model.seed, rep);
  SimulatedData s;
  s.x = gen_covariates(model, rng);
  s.y = gen_response(model, s.x, rng);
  return s;
}

Dataset to_unit_dataset(const SimulatedData& sim) {
  const std::vector<AffineMap> bounds(static_cast<std::size_t>(sim.x.cols()), AffineMap{-1.0, 1.0});
  return rescale_covariates(sim.x, sim.y, bounds);
}

std::vector<double> BandwidthRule::bandwidths(const Dataset& data, std::size_t leading) const {
  const std::size_t d = data.dims();
  leading = std::min(leading, d);
  if (fixed && fixed->size() != leading) {
    throw ConfigError("expected " + std::to_string(leading) + " fixed bandwidths, got " +
                      std::to_string(fixed->size()));
  }
  std::vector<double> h(d);
  const double n = static_cast<double>(data.samples());
  for (std::size_t j = 0; j < d; ++j) {
    if (j >= leading) {
      h[j] = extra;
    } else if (fixed) {
      h[j] = (*fixed)[j];
    } else {
      const auto col = data.x.col(static_cast<Eigen::Index>(j));
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().sum() / (n - 1.0));
      h[j] = factor * sd * std::pow(n, -0.2);
    }
    check_bandwidth(h[j]);
  }
  return h;
}

double fixture_bandwidth(std::size_t n) {
  if (n == 0) throw ConfigError("sample size must be positive");
  return 0.45 * std::pow(static_cast<double>(n) / 100.0, -0.2);
}

BandwidthRule fixture_rule(std::size_t n) {
  BandwidthRule rule;
  const double h = fixture_bandwidth(n);
  rule.fixed = std::vector<double>{h, h};
  return rule;
}

double additive_distance2(double a0, const std::vector<Curve>& a, double b0, const std::vector<Curve>& b,
                          const Grid& grid) {
  // Error e = c + sum_j f_j over [-1, 1]^d; each axis has length 2 and weights 2 w_k.
  const std::size_t d = a.size();
  const double c = a0 - b0;
  std::vector<double> first(d, 0.0);
  double squares = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double f = a[j][k] - b[j][k];
      first[j] += 2.0 * grid.weight(k) * f;
      s += 2.0 * grid.weight(k) * f * f;
    }
    squares += s;
  }
  const double vol = std::pow(2.0, static_cast<double>(d));
  double total = c * c * vol + squares * vol / 2.0;
  double sum_first = 0.0;
  for (double v : first) sum_first += v;
  total += 2.0 * c * sum_first * vol / 2.0;
  double cross = sum_first * sum_first;
  for (double v : first) cross -= v * v;
  total += cross * vol / 4.0;
  return total;
}

double central_integral(const Grid& grid, std::span<const double> values, double fraction) {
  if (values.size() != grid.size()) throw InternalError("central_integral: length mismatch");
  std::size_t lo = grid.size();
  std::size_t hi = 0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (std::abs(-1.0 + 2.0 * grid.point(k)) <= fraction + 1e-12) {
      lo = std::min(lo, k);
      hi = std::max(hi, k);
    }
  }
  if (lo >= hi) return 0.0;
  const double step = 2.0 * grid.step();
  double s = 0.0;
  for (std::size_t k = lo; k <= hi; ++k) s += (k == lo || k == hi ? 0.5 : 1.0) * step * values[k];
  return s;
}

ReplicationOutcome run_replication(const SimModel& model, std::uint64_t rep, const StudyConfig& cfg,
                                   const TruthComponents& truth) {
  ReplicationOutcome out;
  const Grid grid(cfg.grid_points);
  const std::size_t d = model.dims();
  try {
    const Dataset data = to_unit_dataset(simulate(model, rep));
    out.bandwidths = cfg.bandwidth.bandwidths(data, 2);
    const SmoothingContext ctx(data, KernelSpec{cfg.kernel, out.bandwidths}, grid);
    const Family fam = model.family();
    if (cfg.estimator == Estimator::nw) {
      NwFit fit = fit_nw(ctx, fam, cfg.fit);
      out.eta0 = fit.eta0;
      out.components = std::move(fit.components);
      out.outer_iterations = fit.diagnostics.outer_iterations;
    } else {
      LlFit fit = fit_ll(ctx, fam, cfg.fit);
      out.eta0 = fit.eta00;
      out.components = std::move(fit.components0);
      out.outer_iterations = fit.diagnostics.outer_iterations;
    }
  } catch (const Error& e) {
    out.failed = true;
    out.bad = true;
    out.error = e.what();
    return out;
  }
  out.distance2 = additive_distance2(out.eta0, out.components, truth.eta0, truth_curves(truth, d, grid), grid);
  out.bad = !(out.distance2 <= cfg.bad_threshold);
  return out;
}

StudyResult run_study(const SimModel& model, const StudyConfig& cfg) {
  model.validate();
  cfg.fit.validate();
  if (cfg.reps < 2) throw ConfigError("a study needs at least two replications");
  const Grid grid(cfg.grid_points);
  const std::size_t d = model.dims();

  StudyResult res;
  res.model = model;
  res.estimator = cfg.estimator;
  res.reps = cfg.reps;
  res.truth = true_components(model);
  res.truth_curves = truth_curves(res.truth, d, grid);
  for (std::size_t k = 0; k < grid.size(); ++k) res.report_grid.push_back(-1.0 + 2.0 * grid.point(k));

  std::vector<ReplicationOutcome> outcomes(cfg.reps);
  std::size_t threads = cfg.threads > 0 ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, cfg.reps);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < cfg.reps; r = next++) {
      outcomes[r] = run_replication(model, r, cfg, res.truth);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }

  const std::size_t g = grid.size();
  res.mean_curves.assign(d, Curve(g, 0.0));
  double bandwidth_sum = 0.0;
  for (const ReplicationOutcome& o : outcomes) {
    if (o.failed) ++res.failed_count;
    if (o.bad) {
      ++res.bad_count;
      continue;
    }
    ++res.reps_used;
    bandwidth_sum += o.bandwidths.front();
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < g; ++k) res.mean_curves[j][k] += o.components[j][k];
    }
  }
  if (res.reps_used == 0) {
    throw ConvergenceError("all " + std::to_string(cfg.reps) + " replications were bad", {});
  }
  const double used = static_cast<double>(res.reps_used);
  res.mean_bandwidth = bandwidth_sum / used;
  for (Curve& c : res.mean_curves) {
    for (double& v : c) v /= used;
  }

  res.components.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    Curve bias2(g);
    Curve var(g, 0.0);
    Curve mse(g, 0.0);
    for (std::size_t k = 0; k < g; ++k) {
      const double b = res.mean_curves[j][k] - res.truth_curves[j][k];
      bias2[k] = b * b;
    }
    for (const ReplicationOutcome& o : outcomes) {
      if (o.bad) continue;
      for (std::size_t k = 0; k < g; ++k) {
        const double dv = o.components[j][k] - res.mean_curves[j][k];
        const double de = o.components[j][k] - res.truth_curves[j][k];
        var[k] += dv * dv / used;
        mse[k] += de * de / used;
      }
    }
    res.components[j] = {central_integral(grid, bias2, cfg.metric_fraction),
                         central_integral(grid, var, cfg.metric_fraction),
                         central_integral(grid, mse, cfg.metric_fraction)};
  }
  const std::size_t lead = std::min<std::size_t>(2, d);
  for (std::size_t j = 0; j < lead; ++j) {
    res.isb += res.components[j].isb / static_cast<double>(lead);
    res.iv += res.components[j].iv / static_cast<double>(lead);
    res.mise += res.components[j].mise / static_cast<double>(lead);
  }
  return res;
}

}  // namespace sbgam
