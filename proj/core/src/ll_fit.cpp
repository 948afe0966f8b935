#include "sbgam/ll_fit.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "fit_common.hpp"
#include "sbgam/errors.hpp"

namespace sbgam {

LlPredictor LlPredictor::constant(double eta00, std::size_t dims, std::size_t points) {
  return {eta00, std::vector<Curve>(dims, Curve(points, 0.0)), std::vector<Curve>(dims, Curve(points, 0.0))};
}

double LlPredictor::level(std::span<const std::size_t> cell) const noexcept {
  double u = eta00;
  for (std::size_t j = 0; j < cell.size(); ++j) u += components0[j][cell[j]];
  return u;
}

double ll_predictor_eval(const LlPredictor& eta, const SmoothingContext& ctx, std::size_t sample,
                         std::span<const std::size_t> cell) {
  double u = eta.eta00;
  const auto i = static_cast<Eigen::Index>(sample);
  for (std::size_t j = 0; j < cell.size(); ++j) {
    const double z =
        (ctx.data().x(i, static_cast<Eigen::Index>(j)) - ctx.grid().point(cell[j])) / ctx.kernel().bandwidths[j];
    u += eta.components0[j][cell[j]] + z * eta.components1[j][cell[j]];
  }
  return u;
}

std::size_t LlWeightMarginals::block_index(std::size_t j, std::size_t l, std::size_t dims) noexcept {
  return j * (dims - 1) + (l < j ? l : l - 1);
}

const LlWeightMarginals::Block& LlWeightMarginals::block(std::size_t j, std::size_t l) const {
  if (j == l || j >= dims() || l >= dims()) throw InternalError("block needs two distinct dimensions");
  return blocks[block_index(j, l, dims())];
}

Curve LlFit::derivative(std::size_t j) const {
  Curve out = components1.at(j);
  for (double& v : out) v /= bandwidths.at(j);
  return out;
}

namespace {

void check_shape(const LlPredictor& eta, const SmoothingContext& ctx) {
  if (eta.components0.size() != ctx.dims() || eta.components1.size() != ctx.dims()) {
    throw InternalError("predictor dimension does not match the data");
  }
  for (std::size_t j = 0; j < ctx.dims(); ++j) {
    if (eta.components0[j].size() != ctx.grid().size() || eta.components1[j].size() != ctx.grid().size()) {
      throw InternalError("predictor curve length does not match the grid");
    }
    for (std::size_t k = 0; k < ctx.grid().size(); ++k) {
      if (!std::isfinite(eta.components0[j][k]) || !std::isfinite(eta.components1[j][k])) {
        throw InputError("predictor curve has non-finite values");
      }
    }
  }
  if (!std::isfinite(eta.eta00)) throw InputError("predictor intercept is not finite");
}

/// Smallest eigenvalue of the symmetric matrix [[a, b], [b, c]].
double min_eigenvalue(double a, double b, double c) {
  const double half = 0.5 * (a - c);
  return 0.5 * (a + c) - std::sqrt(half * half + b * b);
}

}  // namespace

double smoothed_ql_ll(const LlPredictor& eta, const SmoothingContext& ctx, const Family& fam) {
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
      sq += fam.eval(ll_predictor_eval(eta, ctx, i, c), y).Q * w;
    });
  }
  return sq;
}

LlMarginals ll_marginals(const LlPredictor& eta, const SmoothingContext& ctx, const Family& fam) {
  check_shape(eta, ctx);
  const Grid& grid = ctx.grid();
  const std::size_t d = ctx.dims();
  const std::size_t g = grid.size();
  const auto G = static_cast<Eigen::Index>(g);
  const double inv_n = 1.0 / static_cast<double>(ctx.samples());
  const auto& h = ctx.kernel().bandwidths;

  std::vector<double> inv_w(g);
  for (std::size_t k = 0; k < g; ++k) inv_w[k] = 1.0 / grid.weight(k);

  LlMarginals out;
  LlWeightMarginals& W = out.weights;
  W.v00.assign(d, Curve(g, 0.0));
  W.v01.assign(d, Curve(g, 0.0));
  W.v11.assign(d, Curve(g, 0.0));
  out.zeta0.assign(d, Curve(g, 0.0));
  out.zeta1.assign(d, Curve(g, 0.0));
  // Unordered pairs (a, b), a < b: surfaces of w, w z_a, w z_b, w z_a z_b indexed (k_a, k_b).
  const std::size_t pairs = d * (d - 1) / 2;
  std::vector<Eigen::MatrixXd> s00(pairs, Eigen::MatrixXd::Zero(G, G));
  std::vector<Eigen::MatrixXd> s0a(pairs, Eigen::MatrixXd::Zero(G, G));
  std::vector<Eigen::MatrixXd> s0b(pairs, Eigen::MatrixXd::Zero(G, G));
  std::vector<Eigen::MatrixXd> sab(pairs, Eigen::MatrixXd::Zero(G, G));

  std::vector<double> z(d);
  std::vector<double> aj(d);
  std::vector<std::size_t> cell;
  for (std::size_t i = 0; i < ctx.samples(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double y = ctx.data().y(row);
    for_each_window_cell(ctx.rows(), i, cell, [&](std::span<const std::size_t> c, double kernel) {
      double u = eta.eta00;
      double full = kernel * inv_n;
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t k = c[j];
        z[j] = (ctx.data().x(row, static_cast<Eigen::Index>(j)) - grid.point(k)) / h[j];
        u += eta.components0[j][k] + z[j] * eta.components1[j][k];
        full *= grid.weight(k);
      }
      const FamilyEval e = fam.eval(u, y);
      const double a = -e.q2 * full;
      const double s = e.q1 * full;
      W.mass += a;
      out.score00 += s;
      out.sq += e.Q * full;
      for (std::size_t j = 0; j < d; ++j) {
        const std::size_t k = c[j];
        aj[j] = a * inv_w[k];
        const double sj = s * inv_w[k];
        W.v00[j][k] += aj[j];
        W.v01[j][k] += aj[j] * z[j];
        W.v11[j][k] += aj[j] * z[j] * z[j];
        out.zeta0[j][k] += sj;
        out.zeta1[j][k] += sj * z[j];
      }
      std::size_t p = 0;
      for (std::size_t ja = 0; ja < d; ++ja) {
        for (std::size_t lb = ja + 1; lb < d; ++lb, ++p) {
          const auto ka = static_cast<Eigen::Index>(c[ja]);
          const auto kb = static_cast<Eigen::Index>(c[lb]);
          const double v = aj[ja] * inv_w[c[lb]];
          s00[p](ka, kb) += v;
          s0a[p](ka, kb) += v * z[ja];
          s0b[p](ka, kb) += v * z[lb];
          sab[p](ka, kb) += v * z[ja] * z[lb];
        }
      }
    });
  }

  W.blocks.resize(d * (d - 1));
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      const std::size_t p = MarginalSet::pair_index(a, b, d);
      auto& ab = W.blocks[LlWeightMarginals::block_index(a, b, d)];
      ab = {s00[p], s0b[p], s0a[p], sab[p]};
      auto& ba = W.blocks[LlWeightMarginals::block_index(b, a, d)];
      ba = {s00[p].transpose(), s0a[p].transpose(), s0b[p].transpose(), sab[p].transpose()};
    }
  }

  const double floor = detail::kDegenerateFloor * W.mass;
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < g; ++k) {
      const double lambda = min_eigenvalue(W.v00[j][k], W.v01[j][k], W.v11[j][k]);
      if (!(lambda >= floor) || !(W.mass > 0.0)) throw DegenerateWeightError(j, grid.point(k), lambda);
    }
  }
  return out;
}

namespace {

struct Pair {
  double first;
  double second;
};

Pair solve2(const LlWeightMarginals& W, std::size_t j, std::size_t k, double r0, double r1) {
  const double a = W.v00[j][k];
  const double b = W.v01[j][k];
  const double c = W.v11[j][k];
  const double det = a * c - b * b;
  return {(c * r0 - b * r1) / det, (a * r1 - b * r0) / det};
}

}  // namespace

LlInnerResult ll_inner_solve(const Grid& grid, const LlWeightMarginals& W, const std::vector<Curve>& zeta0,
                             const std::vector<Curve>& zeta1, double score00, const FitConfig& cfg) {
  const std::size_t d = zeta0.size();
  const std::size_t g = grid.size();
  if (W.dims() != d || zeta1.size() != d) throw InternalError("LL marginals do not match the score curves");
  if (W.blocks.size() != d * (d - 1)) throw InternalError("LL pair blocks missing");

  std::vector<double> mass_j(d);
  for (std::size_t j = 0; j < d; ++j) mass_j[j] = trapezoid_integrate(grid, W.v00[j]);
  auto center = [&](std::size_t j, Curve& f0, const Curve& f1) {
    const double c =
        (detail::weighted_integral(grid, W.v00[j], f0) + detail::weighted_integral(grid, W.v01[j], f1)) / mass_j[j];
    for (double& v : f0) v -= c;
  };

  LlInnerResult res;
  res.xi00 = score00 / W.mass;
  res.xi0.assign(d, Curve(g));
  res.xi1.assign(d, Curve(g));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < g; ++k) {
      const Pair p = solve2(W, j, k, zeta0[j][k], zeta1[j][k]);
      res.xi0[j][k] = p.first;
      res.xi1[j][k] = p.second;
    }
    center(j, res.xi0[j], res.xi1[j]);
  }

  const auto G = static_cast<Eigen::Index>(g);
  Eigen::Map<const Eigen::VectorXd> w(grid.weights().data(), G);
  Eigen::VectorXd r0(G);
  Eigen::VectorXd r1(G);
  Eigen::VectorXd wx0(G);
  Eigen::VectorXd wx1(G);
  Curve n0(g);
  Curve n1(g);
  for (std::size_t sweep = 1; sweep <= cfg.max_inner; ++sweep) {
    double change = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < g; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        r0(kk) = zeta0[j][k] - res.xi00 * W.v00[j][k];
        r1(kk) = zeta1[j][k] - res.xi00 * W.v01[j][k];
      }
      for (std::size_t l = 0; l < d; ++l) {
        if (l == j) continue;
        const auto& B = W.block(j, l);
        wx0 = w.cwiseProduct(Eigen::Map<const Eigen::VectorXd>(res.xi0[l].data(), G));
        wx1 = w.cwiseProduct(Eigen::Map<const Eigen::VectorXd>(res.xi1[l].data(), G));
        r0.noalias() -= B.a00 * wx0;
        r0.noalias() -= B.a01 * wx1;
        r1.noalias() -= B.a10 * wx0;
        r1.noalias() -= B.a11 * wx1;
      }
      for (std::size_t k = 0; k < g; ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        const Pair p = solve2(W, j, k, r0(kk), r1(kk));
        n0[k] = p.first;
        n1[k] = p.second;
      }
      center(j, n0, n1);
      for (std::size_t k = 0; k < g; ++k) {
        change = std::max({change, std::abs(n0[k] - res.xi0[j][k]), std::abs(n1[k] - res.xi1[j][k])});
      }
      res.xi0[j].swap(n0);
      res.xi1[j].swap(n1);
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

std::vector<double> ll_constraint_values(const LlPredictor& eta, const Grid& grid, const LlWeightMarginals& W) {
  std::vector<double> out(eta.dims());
  for (std::size_t j = 0; j < eta.dims(); ++j) {
    out[j] = detail::weighted_integral(grid, W.v00[j], eta.components0[j]) +
             detail::weighted_integral(grid, W.v01[j], eta.components1[j]);
  }
  return out;
}

LlPredictor ll_outer_update(const LlPredictor& prev, const LlInnerResult& xi, const SmoothingContext& ctx,
                            const Family& fam, double damping, LlMarginals* next) {
  if (xi.xi0.size() != prev.dims() || xi.xi1.size() != prev.dims()) {
    throw InternalError("update has the wrong number of components");
  }
  LlPredictor eta = prev;
  eta.eta00 += damping * xi.xi00;
  for (std::size_t j = 0; j < eta.dims(); ++j) {
    for (std::size_t k = 0; k < eta.components0[j].size(); ++k) {
      eta.components0[j][k] += damping * xi.xi0[j][k];
      eta.components1[j][k] += damping * xi.xi1[j][k];
    }
  }
  LlMarginals m = ll_marginals(eta, ctx, fam);
  const Grid& grid = ctx.grid();
  for (std::size_t j = 0; j < eta.dims(); ++j) {
    const double mass_j = trapezoid_integrate(grid, m.weights.v00[j]);
    const double c = (detail::weighted_integral(grid, m.weights.v00[j], eta.components0[j]) +
                      detail::weighted_integral(grid, m.weights.v01[j], eta.components1[j])) /
                     mass_j;
    for (double& v : eta.components0[j]) v -= c;
    eta.eta00 += c;
  }
  if (next != nullptr) *next = std::move(m);
  return eta;
}

double ll_residual_norm(const Grid& grid, const LlMarginals& m) {
  double sum = m.score00 * m.score00;
  for (std::size_t j = 0; j < m.zeta0.size(); ++j) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const Pair p = solve2(m.weights, j, k, m.zeta0[j][k], m.zeta1[j][k]);
      sum += grid.weight(k) * (p.first * m.zeta0[j][k] + p.second * m.zeta1[j][k]);
    }
  }
  return std::sqrt(std::max(sum, 0.0));
}

namespace {

double max_abs_ratio(const std::vector<double>& values, double mass) {
  double r = 0.0;
  for (double v : values) r = std::max(r, std::abs(v) / mass);
  return r;
}

double step_sup(const LlInnerResult& xi, double damping) {
  double s = damping * detail::additive_sup(xi.xi00, xi.xi0);
  for (const Curve& c : xi.xi1) s = std::max(s, damping * detail::curve_sup(c));
  return s;
}

double predictor_sup(const LlPredictor& eta) {
  double s = detail::additive_sup(eta.eta00, eta.components0);
  for (const Curve& c : eta.components1) s = std::max(s, detail::curve_sup(c));
  return s;
}

LlFit drive(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg, const LlPredictor* start,
            std::size_t fixed_steps) {
  cfg.validate();
  const Grid& grid = ctx.grid();
  const std::size_t d = ctx.dims();
  detail::check_responses(ctx.data(), fam);

  LlPredictor eta;
  LlMarginals m;
  if (start != nullptr) {
    if (cfg.initializer != Initializer::user_supplied) {
      throw ConfigError("a start predictor requires initializer = user_supplied");
    }
    LlInnerResult zero;
    zero.xi0.assign(d, Curve(grid.size(), 0.0));
    zero.xi1.assign(d, Curve(grid.size(), 0.0));
    eta = ll_outer_update(*start, zero, ctx, fam, 1.0, &m);
  } else {
    if (cfg.initializer == Initializer::user_supplied) throw ConfigError("initializer user_supplied needs a start");
    eta = LlPredictor::constant(constant_start(ctx.data(), fam), d, grid.size());
    m = ll_marginals(eta, ctx, fam);
  }

  FitDiagnostics diag;
  diag.sq_history.push_back(m.sq);
  const std::size_t limit = fixed_steps > 0 ? fixed_steps : cfg.max_outer;
  bool converged = false;
  for (std::size_t step = 1; step <= limit; ++step) {
    LlInnerResult inner;
    try {
      inner = ll_inner_solve(grid, m.weights, m.zeta0, m.zeta1, m.score00, cfg);
    } catch (const ConvergenceError& e) {
      diag.outer_iterations = step - 1;
      throw ConvergenceError(std::string(e.what()) + " at outer step " + std::to_string(step), diag,
                             e.contraction());
    }
    diag.inner_sweeps.push_back(inner.sweeps);
    diag.inner_change_norms.push_back(inner.change_norms);
    diag.inner_contraction.push_back(inner.contraction);

    LlMarginals next;
    eta = ll_outer_update(eta, inner, ctx, fam, cfg.damping, &next);
    m = std::move(next);

    const double s = step_sup(inner, cfg.damping);
    const double change = s / std::max(1.0, predictor_sup(eta));
    diag.outer_iterations = step;
    diag.step_sup_norms.push_back(s);
    diag.outer_change_norms.push_back(change);
    diag.constraint_residuals.push_back(max_abs_ratio(ll_constraint_values(eta, grid, m.weights), m.weights.mass));
    diag.sq_history.push_back(m.sq);
    if (fixed_steps == 0 && change < cfg.tol_outer) {
      converged = true;
      break;
    }
  }

  diag.residual_norm = ll_residual_norm(grid, m);
  diag.sq = m.sq;
  diag.mass = m.weights.mass;
  for (double v : ll_constraint_values(eta, grid, m.weights)) {
    diag.final_constraint_residuals.push_back(v / m.weights.mass);
  }
  diag.converged = converged;
  if (fixed_steps == 0 && !converged) {
    throw ConvergenceError("outer iteration did not converge in " + std::to_string(cfg.max_outer) + " steps", diag);
  }
  return {eta.eta00, std::move(eta.components0), std::move(eta.components1), ctx.kernel().bandwidths,
          std::move(diag)};
}

}  // namespace

LlFit fit_ll(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg, const LlPredictor* start) {
  return drive(ctx, fam, cfg, start, 0);
}

LlFit run_ll_steps(const SmoothingContext& ctx, const Family& fam, const FitConfig& cfg, std::size_t steps,
                   const LlPredictor* start) {
  if (steps == 0) throw ConfigError("run_ll_steps needs at least one step");
  return drive(ctx, fam, cfg, start, steps);
}

}  // namespace sbgam
