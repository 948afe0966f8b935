#include "sbgam/nw_fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "fit_common.hpp"
#include "sbgam/errors.hpp"

namespace sbgam {

AdditivePredictor AdditivePredictor::constant(double eta0, std::size_t dims, std::size_t points) {
  return {eta0, std::vector<Curve>(dims, Curve(points, 0.0))};
}

double AdditivePredictor::at(std::span<const std::size_t> cell) const noexcept {
  double u = eta0;
  for (std::size_t j = 0; j < cell.size(); ++j) u += components[j][cell[j]];
  return u;
}

double AdditivePredictor::sup_norm() const { return detail::additive_sup(eta0, components); }

double constant_start(const Dataset& data, const Family& fam) {
  detail::check_responses(data, fam);
  const double mean = data.y.mean();
  const double u = fam.link(mean);
  if (!std::isfinite(u)) {
    throw InputError("constant-model start is not finite for family " + std::string(fam.name()) +
                     " (mean response " + std::to_string(mean) + ")");
  }
  return u;
}

namespace {

void check_shape(const AdditivePredictor& eta, const SmoothingContext& ctx) {
  if (eta.dims() != ctx.dims()) throw InternalError("predictor dimension does not match the data");
  for (const Curve& c : eta.components) {
    if (c.size() != ctx.grid().size()) throw InternalError("predictor curve length does not match the grid");
    for (double v : c) {
      if (!std::isfinite(v)) throw InputError("predictor curve has non-finite values");
    }
  }
  if (!std::isfinite(eta.eta0)) throw InputError("predictor intercept is not finite");
}

}  // namespace

double smoothed_ql_nw(const AdditivePredictor& eta, const SmoothingContext& ctx, const Family& fam) {
  check_shape(eta, ctx);
  const Grid& grid = ctx.grid();
  const double inv_n = 1.0 / static_cast<double>(ctx.samples());
  double sq = 0.0;
  std::vector<std::size_t> cell;
  for (std::size_t i = 0; i < ctx.samples(); ++i) {
    const double y = ctx.data().y(static_cast<Eigen::Index>(i));
    for_each_window_cell(ctx.rows(), i, cell, [&](std::span<const std::size_t> c, double kernel) {
      double w = kernel * inv_n;
      for (std::size_t k : c) w *= grid.weight(k);
      sq += fam.eval(eta.at(c), y).Q * w;
    });
  }
  return sq;
}

NwMarginals nw_marginals(const AdditivePredictor& eta, const SmoothingContext& ctx, const Family& fam) {
  check_shape(eta, ctx);
  const Grid& grid = ctx.grid();
  const std::size_t d = ctx.dims();
  const double inv_n = 1.0 / static_cast<double>(ctx.samples());
  MarginalAccumulator weight(grid, d, true);
  MarginalAccumulator score(grid, d, false);
  double sq = 0.0;
  std::vector<std::size_t> cell;
  for (std::size_t i = 0; i < ctx.samples(); ++i) {
    const double y = ctx.data().y(static_cast<Eigen::Index>(i));
    for_each_window_cell(ctx.rows(), i, cell, [&](std::span<const std::size_t> c, double kernel) {
      const FamilyEval e = fam.eval(eta.at(c), y);
      const double k = kernel * inv_n;
      weight.add(c, -e.q2 * k);
      score.add(c, e.q1 * k);
      double w = k;
      for (std::size_t idx : c) w *= grid.weight(idx);
      sq += e.Q * w;
    });
  }
  NwMarginals out;
  out.weights = std::move(weight).take();
  MarginalSet s = std::move(score).take();
  out.score_total = s.total;
  out.score_curves = std::move(s.curves);
  out.sq = sq;

  const double mass = out.weights.total;
  const double floor = detail::kDegenerateFloor * mass / static_cast<double>(grid.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double v = out.weights.curves[j][k];
      if (!(v >= floor) || !(mass > 0.0)) throw DegenerateWeightError(j, grid.point(k), v);
    }
  }
  return out;
}

NwInnerResult nw_inner_solve(const Grid& grid, const WeightMarginals& weights, double xi0,
                             const std::vector<Curve>& xi_tilde, const FitConfig& cfg) {
  const std::size_t d = xi_tilde.size();
  const std::size_t g = grid.size();
  if (weights.dims() != d) throw InternalError("weight marginals do not match the number of components");
  if (d > 1 && weights.surfaces.size() != d * (d - 1) / 2) throw InternalError("weight surfaces missing");

  std::vector<double> mass_j(d);
  for (std::size_t j = 0; j < d; ++j) {
    mass_j[j] = trapezoid_integrate(grid, weights.curves[j]);
  }
  auto center = [&](std::size_t j, Curve& f) {
    const double c = detail::weighted_integral(grid, f, weights.curves[j]) / mass_j[j];
    for (double& v : f) v -= c;
  };

  NwInnerResult res;
  res.xi.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    res.xi[j].resize(g);
    for (std::size_t k = 0; k < g; ++k) res.xi[j][k] = xi_tilde[j][k] - xi0;
    center(j, res.xi[j]);
  }

  const auto G = static_cast<Eigen::Index>(g);
  Eigen::Map<const Eigen::VectorXd> w(grid.weights().data(), G);
  Eigen::VectorXd cross(G);
  Eigen::VectorXd wxi(G);
  Curve next(g);
  for (std::size_t sweep = 1; sweep <= cfg.max_inner; ++sweep) {
    double change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      cross.setZero();
      for (std::size_t l = 0; l < d; ++l) {
        if (l == j) continue;
        wxi = w.cwiseProduct(Eigen::Map<const Eigen::VectorXd>(res.xi[l].data(), G));
        if (j < l) {
          cross.noalias() += weights.stored_surface(j, l) * wxi;
        } else {
          cross.noalias() += weights.stored_surface(l, j).transpose() * wxi;
        }
      }
      for (std::size_t k = 0; k < g; ++k) {
        next[k] = xi_tilde[j][k] - xi0 - cross(static_cast<Eigen::Index>(k)) / weights.curves[j][k];
      }
      center(j, next);
      for (std::size_t k = 0; k < g; ++k) change = std::max(change, std::abs(next[k] - res.xi[j][k]));
      res.xi[j].swap(next);
    }
    res.change_norms.push_back(change);
    res.sweeps = sweep;
    const std::size_t r = res.change_norms.size();
    if (r >= 2 && res.change_norms[r - 2] > 0.0) res.contraction = change / res.change_norms[r - 2];
    if (change < cfg.tol_inner) return res;
  }
  throw ConvergenceError("inner backfitting did not converge in " + std::to_string(cfg.max_inner) + " sweeps", {},
                         res.contraction);
}

std::vector<double> nw_constraint_values(const AdditivePredictor& eta, const Grid& grid,
                                         const WeightMarginals& weights) {
  std::vector<double> out(eta.dims());
  for (std::size_t j = 0; j < eta.dims(); ++j) {
    out[j] = detail::weighted_integral(grid, eta.components[j], weights.curves[j]);
  }
  return out;
}

AdditivePredictor nw_outer_update(const AdditivePredictor& prev, double xi0, const std::vector<Curve>& xi,
                                  const SmoothingContext& ctx, const Family& fam, double damping,
                                  NwMarginals* next) {
  if (xi.size() != prev.dims()) throw InternalError("update has the wrong number of components");
  AdditivePredictor eta = prev;
  eta.eta0 += damping * xi0;
  for (std::size_t j = 0; j < eta.dims(); ++j) {
    for (std::size_t k = 0; k < eta.components[j].size(); ++k) eta.components[j][k] += damping * xi[j][k];
  }
  NwMarginals m = nw_marginals(eta, ctx, fam);
  for (std::size_t j = 0; j < eta.dims(); ++j) {
    const double mass_j = trapezoid_integrate(ctx.grid(), m.weights.curves[j]);
    const double c = detail::weighted_integral(ctx.grid(), eta.components[j], m.weights.curves[j]) / mass_j;
    for (double& v : eta.components[j]) v -= c;
    eta.eta0 += c;
  }
  if (next != nullptr) *next = std::move(m);
  return eta;
}

double nw_residual_norm(const Grid& grid, const NwMarginals& m) {
  double sum = m.score_total * m.score_total;
  for (std::size_t j = 0; j < m.score_curves.size(); ++j) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double wj = m.weights.curves[j][k];
      const double r = m.score_curves[j][k] / wj;
      sum += grid.weight(k) * r * r * wj;
    }
  }
  return std::sqrt(sum);
}

double nw_residual_norm(const AdditivePredictor& eta, const SmoothingContext& ctx, const Family& fam) {
  return nw_residual_norm(ctx.grid(), nw_marginals(eta, ctx, fam));
}

namespace {

double max_abs_ratio(const std::vector<double>& values, double mass) {
  double r = 0.0;
  for (double v : values) r = std::max(r, std::abs(v) / mass);
  return r;
}

NwFit drive(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg, const AdditivePredictor* start,
            std::size_t fixed_steps) {
  cfg.validate();
  const Grid& grid = ctx.grid();
  const std::size_t d = ctx.dims();
  detail::check_responses(ctx.data(), fam);

  AdditivePredictor eta;
  NwMarginals m;
  if (start != nullptr) {
    if (cfg.initializer != Initializer::user_supplied) {
      throw ConfigError("a start predictor requires initializer = user_supplied");
    }
    // Shift the start so that it satisfies the normalizing constraints.
    eta = nw_outer_update(*start, 0.0, std::vector<Curve>(d, Curve(grid.size(), 0.0)), ctx, fam, 1.0, &m);
  } else {
    if (cfg.initializer == Initializer::user_supplied) throw ConfigError("initializer user_supplied needs a start");
    eta = AdditivePredictor::constant(constant_start(ctx.data(), fam), d, grid.size());
    m = nw_marginals(eta, ctx, fam);
  }

  FitDiagnostics diag;
  diag.sq_history.push_back(m.sq);
  const std::size_t limit = fixed_steps > 0 ? fixed_steps : cfg.max_outer;
  bool converged = false;
  for (std::size_t step = 1; step <= limit; ++step) {
    const double xi0 = m.score_total / m.weights.total;
    std::vector<Curve> xi_tilde(d, Curve(grid.size()));
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < grid.size(); ++k) xi_tilde[j][k] = m.score_curves[j][k] / m.weights.curves[j][k];
    }
    NwInnerResult inner;
    try {
      inner = nw_inner_solve(grid, m.weights, xi0, xi_tilde, cfg);
    } catch (const ConvergenceError& e) {
      diag.outer_iterations = step - 1;
      throw ConvergenceError(std::string(e.what()) + " at outer step " + std::to_string(step), diag,
                             e.contraction());
    }
    diag.inner_sweeps.push_back(inner.sweeps);
    diag.inner_change_norms.push_back(inner.change_norms);
    diag.inner_contraction.push_back(inner.contraction);

    NwMarginals next;
    eta = nw_outer_update(eta, xi0, inner.xi, ctx, fam, cfg.damping, &next);
    m = std::move(next);

    std::vector<Curve> step_curves = inner.xi;
    for (Curve& c : step_curves) {
      for (double& v : c) v *= cfg.damping;
    }
    const double step_sup = detail::additive_sup(cfg.damping * xi0, step_curves);
    const double change = step_sup / std::max(1.0, eta.sup_norm());
    diag.outer_iterations = step;
    diag.step_sup_norms.push_back(step_sup);
    diag.outer_change_norms.push_back(change);
    diag.constraint_residuals.push_back(max_abs_ratio(nw_constraint_values(eta, grid, m.weights), m.weights.total));
    diag.sq_history.push_back(m.sq);
    if (fixed_steps == 0 && change < cfg.tol_outer) {
      converged = true;
      break;
    }
  }

  diag.residual_norm = nw_residual_norm(grid, m);
  diag.sq = m.sq;
  diag.mass = m.weights.total;
  for (double v : nw_constraint_values(eta, grid, m.weights)) {
    diag.final_constraint_residuals.push_back(v / m.weights.total);
  }
  diag.converged = converged;
  if (fixed_steps == 0 && !converged) {
    throw ConvergenceError("outer iteration did not converge in " + std::to_string(cfg.max_outer) + " steps", diag);
  }
  return {eta.eta0, std::move(eta.components), std::move(diag)};
}

}  // namespace

NwFit fit_nw(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg, const AdditivePredictor* start) {
  return drive(ctx, fam, cfg, start, 0);
}

NwFit run_nw_steps(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg, std::size_t steps,
                   const AdditivePredictor* start) {
  if (steps == 0) throw ConfigError("run_nw_steps needs at least one step");
  return drive(ctx, fam, cfg, start, steps);
}

}  // namespace sbgam
