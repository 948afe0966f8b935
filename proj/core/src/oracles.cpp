#include "sbgam/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "sbgam/errors.hpp"
#include "sbgam/quadrature.hpp"

namespace sbgam {

namespace {

constexpr double kRunaway = 29.0;
constexpr std::size_t kMaxNewton = 200;

struct WindowSample {
  double y;
  double k;
  double z;
};

double local_objective(const Family& fam, const std::vector<WindowSample>& win, double a, double b) {
  double s = 0.0;
  for (const auto& w : win) s += w.k * fam.eval(a + b * w.z, w.y).Q;
  return s;
}

bool runaway(const std::vector<WindowSample>& win, double a, double b) {
  for (const auto& w : win) {
    if (std::abs(a + b * w.z) >= kRunaway) return true;
  }
  return false;
}

// Newton with step halving on the local quasi-likelihood; b stays 0 for order 0.
bool local_newton(const Family& fam, const std::vector<WindowSample>& win, bool linear, double& a, double& b) {
  double obj = local_objective(fam, win, a, b);
  for (std::size_t it = 0; it < kMaxNewton; ++it) {
    double g0 = 0.0, g1 = 0.0, h00 = 0.0, h01 = 0.0, h11 = 0.0, mass = 0.0;
    for (const auto& w : win) {
      const FamilyEval e = fam.eval(a + b * w.z, w.y);
      g0 += w.k * e.q1;
      g1 += w.k * e.q1 * w.z;
      h00 += w.k * e.q2;
      h01 += w.k * e.q2 * w.z;
      h11 += w.k * e.q2 * w.z * w.z;
      mass += w.k;
    }
    double s0 = 0.0, s1 = 0.0;
    if (!linear) {
      s0 = h00 < 0.0 ? -g0 / h00 : g0 / mass;
    } else {
      const double det = h00 * h11 - h01 * h01;
      if (h00 < 0.0 && det > 0.0) {
        s0 = -(h11 * g0 - h01 * g1) / det;
        s1 = -(h00 * g1 - h01 * g0) / det;
      } else {
        s0 = g0 / mass;
        s1 = g1 / mass;
      }
    }
    if (!std::isfinite(s0) || !std::isfinite(s1)) return false;
    double t = 1.0;
    double next = obj;
    while (true) {
      if (runaway(win, a + t * s0, b + t * s1)) return false;
      next = local_objective(fam, win, a + t * s0, b + t * s1);
      if (next >= obj - 1e-15 * std::abs(obj) || t < 1e-10) break;
      t *= 0.5;
    }
    a += t * s0;
    b += t * s1;
    obj = next;
    const double step = t * std::max(std::abs(s0), std::abs(s1));
    if (step <= 1e-14 * std::max(1.0, std::abs(a) + std::abs(b))) return true;
  }
  return false;
}

template <class Visit>
void for_each_cell(std::size_t dims, std::size_t points, Visit&& visit) {
  std::vector<std::size_t> cell(dims, 0);
  if (points == 0) return;
  while (true) {
    visit(std::span<const std::size_t>(cell));
    std::size_t j = dims;
    while (j > 0) {
      --j;
      if (++cell[j] < points) break;
      cell[j] = 0;
      if (j == 0) return;
    }
    if (dims == 0) return;
  }
}

// Tensor Gauss-Legendre sum of f over the box with dimension `skip` held at `fixed`.
template <class F>
double box_integral(const AsymptoticInputs& in, std::size_t points, F&& f, std::size_t skip = SIZE_MAX,
                    double fixed = 0.0) {
  const std::size_t d = in.dims();
  std::vector<GaussRule> rules;
  std::vector<std::size_t> axes;
  for (std::size_t j = 0; j < d; ++j) {
    if (j == skip) continue;
    rules.push_back(gauss_legendre(points, in.lo[j], in.hi[j]));
    axes.push_back(j);
  }
  std::vector<double> x(d, fixed);
  double sum = 0.0;
  for_each_cell(axes.size(), points, [&](std::span<const std::size_t> cell) {
    double w = 1.0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      x[axes[a]] = rules[a].nodes[cell[a]];
      w *= rules[a].weights[cell[a]];
    }
    sum += w * f(std::span<const double>(x));
  });
  return sum;
}

double phi(const AsymptoticInputs& in, std::size_t j, std::span<const double> x) {
  return in.family.mean_d1(in.predictor(x)) * in.component_d1(j, x[j]);
}

double phi2(const AsymptoticInputs& in, std::size_t j, std::span<const double> x) {
  const double u = in.predictor(x);
  const double e1 = in.component_d1(j, x[j]);
  return in.family.mean_d2(u) * e1 * e1 + in.family.mean_d1(u) * in.component_d2(j, x[j]);
}

// omega = w* g'(m) = w* / m'(eta*).
double omega(const AsymptoticInputs& in, std::span<const double> x) {
  return in.weight(x) / in.family.mean_d1(in.predictor(x));
}

}  // namespace

bool PointwiseCurve::all_converged() const {
  return std::all_of(converged.begin(), converged.end(), [](bool b) { return b; });
}

PointwiseCurve pointwise_1d_oracle(const Dataset& data, const KernelSpec& kernel, const Grid& grid,
                                   const Family& fam, OracleOrder order) {
  if (data.dims() != 1 || kernel.dims() != 1) throw InputError("the pointwise oracle needs one covariate");
  data.validate();
  kernel.validate();
  const double h = kernel.bandwidths[0];
  const std::size_t n = data.samples();
  const bool linear = order == OracleOrder::linear;
  std::vector<KernelRow> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    rows.push_back(discrete_kernel_row(kernel.base, grid.points(), data.x(static_cast<Eigen::Index>(i), 0), h));
  }

  PointwiseCurve out;
  out.level.assign(grid.size(), 0.0);
  out.slope.assign(linear ? grid.size() : 0, 0.0);
  out.converged.assign(grid.size(), false);
  std::vector<WindowSample> win;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    win.clear();
    double mass = 0.0, ysum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double kv = rows[i].at(k);
      if (kv == 0.0) continue;
      const double xi = data.x(static_cast<Eigen::Index>(i), 0);
      const double y = data.y(static_cast<Eigen::Index>(i));
      win.push_back({y, kv, (xi - grid.point(k)) / h});
      mass += kv;
      ysum += kv * y;
    }
    if (win.empty()) continue;
    double a = fam.link(ysum / mass);
    double b = 0.0;
    if (!std::isfinite(a) || std::abs(a) >= kRunaway) continue;
    const bool ok = local_newton(fam, win, linear, a, b);
    out.level[k] = a;
    if (linear) out.slope[k] = b / h;
    out.converged[k] = ok;
  }
  return out;
}

LsqSbfSolution lsq_sbf_oracle(const Dataset& data, const KernelSpec& kernel, const Grid& grid, Estimator estimator) {
  data.validate();
  kernel.validate();
  const std::size_t d = data.dims();
  const std::size_t g = grid.size();
  const std::size_t n = data.samples();
  if (kernel.dims() != d) throw ConfigError("one bandwidth per covariate is required");
  if (d == 0 || d > 3 || g > 21) throw ConfigError("the dense oracle is limited to d <= 3 and 21 grid points");
  const bool linear = estimator == Estimator::ll;
  const std::size_t per_dim = linear ? 2 * g : g;
  const std::size_t params = 1 + d * per_dim;
  const auto P = static_cast<Eigen::Index>(params);
  const auto D = static_cast<Eigen::Index>(d);

  std::vector<std::vector<std::vector<double>>> kv(d, std::vector<std::vector<double>>(n));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const KernelRow row = discrete_kernel_row(kernel.base, grid.points(),
                                                data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                                                kernel.bandwidths[j]);
      kv[j][i].resize(g);
      for (std::size_t k = 0; k < g; ++k) kv[j][i][k] = row.at(k);
    }
  }

  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(P, P);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(P);
  Eigen::MatrixXd constraints = Eigen::MatrixXd::Zero(D, P);
  std::vector<Eigen::Index> idx;
  std::vector<double> val;
  const double inv_n = 1.0 / static_cast<double>(n);
  for_each_cell(d, g, [&](std::span<const std::size_t> cell) {
    double cell_weight = inv_n;
    for (std::size_t j = 0; j < d; ++j) cell_weight *= grid.weight(cell[j]);
    for (std::size_t i = 0; i < n; ++i) {
      double k = 1.0;
      for (std::size_t j = 0; j < d && k != 0.0; ++j) k *= kv[j][i][cell[j]];
      if (k == 0.0) continue;
      const double a = cell_weight * k;
      idx.assign(1, 0);
      val.assign(1, 1.0);
      for (std::size_t j = 0; j < d; ++j) {
        const auto base = static_cast<Eigen::Index>(1 + j * per_dim + cell[j]);
        idx.push_back(base);
        val.push_back(1.0);
        constraints(static_cast<Eigen::Index>(j), base) += a;
        if (linear) {
          const double z = (data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) - grid.point(cell[j])) /
                           kernel.bandwidths[j];
          idx.push_back(base + static_cast<Eigen::Index>(g));
          val.push_back(z);
          constraints(static_cast<Eigen::Index>(j), base + static_cast<Eigen::Index>(g)) += a * z;
        }
      }
      const double y = data.y(static_cast<Eigen::Index>(i));
      for (std::size_t p = 0; p < idx.size(); ++p) {
        rhs(idx[p]) += a * y * val[p];
        for (std::size_t q = 0; q < idx.size(); ++q) normal(idx[p], idx[q]) += a * val[p] * val[q];
      }
    }
  });

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(P + D, P + D);
  kkt.topLeftCorner(P, P) = normal;
  kkt.topRightCorner(P, D) = constraints.transpose();
  kkt.bottomLeftCorner(D, P) = constraints;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(P + D);
  b.head(P) = rhs;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  lu.setThreshold(1e-13);
  if (!lu.isInvertible()) throw InputError("degenerate data: the least-squares backfitting system is singular");
  const Eigen::VectorXd sol = lu.solve(b);

  LsqSbfSolution out;
  out.eta0 = sol(0);
  out.components0.assign(d, Curve(g));
  if (linear) out.components1.assign(d, Curve(g));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < g; ++k) {
      const auto base = static_cast<Eigen::Index>(1 + j * per_dim + k);
      out.components0[j][k] = sol(base);
      if (linear) out.components1[j][k] = sol(base + static_cast<Eigen::Index>(g));
    }
  }
  return out;
}

double AsymptoticInputs::predictor(std::span<const double> x) const {
  double u = eta0;
  for (std::size_t j = 0; j < components.size(); ++j) u += components[j](x[j]);
  return u;
}

double AsymptoticInputs::component_d1(std::size_t j, double x) const {
  if (j < d1.size() && d1[j]) return d1[j](x);
  return (components[j](x + diff_step) - components[j](x - diff_step)) / (2.0 * diff_step);
}

double AsymptoticInputs::component_d2(std::size_t j, double x) const {
  if (j < d2.size() && d2[j]) return d2[j](x);
  return (components[j](x + diff_step) - 2.0 * components[j](x) + components[j](x - diff_step)) /
         (diff_step * diff_step);
}

double AsymptoticInputs::log_density_gradient(std::size_t j, std::span<const double> x) const {
  if (log_gradient) return log_gradient(j, x);
  std::vector<double> up(x.begin(), x.end());
  std::vector<double> down(x.begin(), x.end());
  const double hi_step = std::min(diff_step, hi[j] - x[j]);
  const double lo_step = std::min(diff_step, x[j] - lo[j]);
  if (!(hi_step >= 0.0 && lo_step >= 0.0)) throw ConfigError("density gradient requested outside the box");
  up[j] += hi_step;
  down[j] -= lo_step;
  return (std::log(density(up)) - std::log(density(down))) / (hi_step + lo_step);
}

double AsymptoticInputs::weight(std::span<const double> x) const {
  return family.psi(predictor(x)) * density(x);
}

void AsymptoticInputs::validate() const {
  const std::size_t d = components.size();
  if (d == 0) throw ConfigError("asymptotic inputs need at least one component");
  if (lo.size() != d || hi.size() != d || delta.size() != d) {
    throw ConfigError("box bounds and delta must have one entry per component");
  }
  for (std::size_t j = 0; j < d; ++j) {
    if (!(hi[j] > lo[j])) throw ConfigError("empty box in dimension " + std::to_string(j + 1));
    if (!(delta[j] > 0.0)) throw ConfigError("delta must be positive");
    if (!components[j]) throw ConfigError("missing truth component " + std::to_string(j + 1));
  }
  if (!density) throw ConfigError("a covariate density is required");
  if (quad_points < 2) throw ConfigError("at least two quadrature points are required");
  if (!(diff_step > 0.0)) throw ConfigError("difference step must be positive");
}

AsymptoticInputs simulation_inputs(const SimModel& model, std::vector<double> delta, BaseKernel kernel) {
  const std::size_t d = model.dims();
  const TruthComponents truth = true_components(model);
  AsymptoticInputs in(model.family());
  in.lo.assign(d, -1.0);
  in.hi.assign(d, 1.0);
  in.eta0 = truth.eta0;
  for (std::size_t j = 0; j < d; ++j) {
    in.components.push_back([truth, j](double x) { return truth.component(j, x); });
    in.d1.push_back([j](double x) { return truth_raw_d1(j, x); });
    in.d2.push_back([j](double x) { return truth_raw_d2(j, x); });
  }
  const CovariateDensity density(model);
  in.density = [density](std::span<const double> x) { return density(x); };
  in.log_gradient = [density](std::size_t j, std::span<const double> x) { return density.log_gradient(j, x); };
  in.delta = std::move(delta);
  in.kernel = kernel;
  in.validate();
  return in;
}

double oracle_variance(const AsymptoticInputs& in, std::size_t j, double xj) {
  in.validate();
  if (j >= in.dims()) throw ConfigError("component index out of range");
  const Family& fam = in.family;
  const std::size_t q = in.quad_points;
  double num = 0.0, den = 0.0, pj = 0.0;
  const std::size_t d = in.dims();
  std::vector<GaussRule> rules;
  std::vector<std::size_t> axes;
  for (std::size_t l = 0; l < d; ++l) {
    if (l == j) continue;
    rules.push_back(gauss_legendre(q, in.lo[l], in.hi[l]));
    axes.push_back(l);
  }
  std::vector<double> x(d, xj);
  for_each_cell(axes.size(), q, [&](std::span<const std::size_t> cell) {
    double w = 1.0;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      x[axes[a]] = rules[a].nodes[cell[a]];
      w *= rules[a].weights[cell[a]];
    }
    const double p = in.density(x);
    const double u = in.predictor(x);
    const double psi = fam.psi(u);
    const double v = in.conditional_variance ? in.conditional_variance(x) : fam.variance(fam.inverse_link(u));
    num += w * v * psi * psi * p;
    den += w * psi * p;
    pj += w * p;
  });
  if (!(pj > 0.0)) throw InputError("covariate density vanishes at the requested point");
  const double e_num = num / pj;
  const double e_den = den / pj;
  return e_num / (e_den * e_den) / (in.delta[j] * pj) * kernel_constants(in.kernel).roughness;
}

double nw_bias_field(const AsymptoticInputs& in, std::span<const double> x) {
  const double mu2 = kernel_constants(in.kernel).mu2;
  const double u = in.predictor(x);
  double s = 0.0;
  for (std::size_t j = 0; j < in.dims(); ++j) {
    s += in.delta[j] * in.delta[j] * (in.log_density_gradient(j, x) * phi(in, j, x) + 0.5 * phi2(in, j, x));
  }
  return s / in.family.mean_d1(u) * mu2;
}

AdditiveProjection project_additive(const FieldFunction& field, const FieldFunction& weight, const Grid& grid,
                                    std::span<const AffineMap> box) {
  const std::size_t d = box.size();
  const std::size_t g = grid.size();
  if (d == 0) throw ConfigError("projection needs at least one dimension");
  AdditiveProjection out;
  out.points.assign(d, std::vector<double>(g));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < g; ++k) out.points[j][k] = box[j].to_original(grid.point(k));
  }

  std::size_t cells = 1;
  for (std::size_t j = 0; j < d; ++j) cells *= g;
  std::vector<double> wv(cells);
  std::vector<double> fv(cells);
  std::vector<double> x(d);
  auto flat = [g](std::span<const std::size_t> cell) {
    std::size_t f = 0;
    for (std::size_t c : cell) f = f * g + c;
    return f;
  };
  for_each_cell(d, g, [&](std::span<const std::size_t> cell) {
    for (std::size_t j = 0; j < d; ++j) x[j] = out.points[j][cell[j]];
    const std::size_t f = flat(cell);
    wv[f] = weight(x);
    fv[f] = field(x) * wv[f];
  });
  const MarginalSet wm =
      marginalize_all(grid, d, [&](std::span<const std::size_t> c) { return wv[flat(c)]; }, true);
  const MarginalSet fm =
      marginalize_all(grid, d, [&](std::span<const std::size_t> c) { return fv[flat(c)]; }, false);
  if (!(wm.total > 0.0)) throw InputError("projection weight has no mass");
  std::vector<Curve> tilde(d, Curve(g));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < g; ++k) {
      if (!(wm.curves[j][k] > 0.0)) throw DegenerateWeightError(j, out.points[j][k], wm.curves[j][k]);
      tilde[j][k] = fm.curves[j][k] / wm.curves[j][k];
    }
  }
  out.b0 = fm.total / wm.total;
  FitConfig cfg;
  cfg.tol_inner = 1e-13;
  cfg.max_inner = 5000;
  out.components = nw_inner_solve(grid, wm, out.b0, tilde, cfg).xi;
  return out;
}

AdditiveProjection nw_bias_projection(const AsymptoticInputs& in, const Grid& grid) {
  in.validate();
  std::vector<AffineMap> box;
  for (std::size_t j = 0; j < in.dims(); ++j) box.push_back({in.lo[j], in.hi[j]});
  return project_additive([&](std::span<const double> x) { return nw_bias_field(in, x); },
                          [&](std::span<const double> x) { return in.weight(x); }, grid, box);
}

double nw_intercept_bias(const AsymptoticInputs& in) {
  in.validate();
  const KernelConstants kc = kernel_constants(in.kernel);
  const std::size_t q = in.quad_points;
  const std::size_t d = in.dims();
  const double expected_q2 = -box_integral(in, q, [&](std::span<const double> x) { return in.weight(x); });
  double sum = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double interior =
        box_integral(in, q, [&](std::span<const double> x) { return phi2(in, j, x) * omega(in, x); });
    auto edge = [&](std::span<const double> x) { return phi(in, j, x) * omega(in, x); };
    const double lower = box_integral(in, q, edge, j, in.lo[j]);
    const double upper = box_integral(in, q, edge, j, in.hi[j]);
    sum += in.delta[j] * in.delta[j] * (0.5 * kc.mu2 * interior + kc.kappa * (lower - upper));
  }
  return sum / expected_q2;
}

double ll_bias(const AsymptoticInputs& in, std::size_t j, double xj) {
  if (j >= in.dims() || j >= in.delta.size()) throw ConfigError("component index out of range");
  return 0.5 * in.delta[j] * in.delta[j] * kernel_constants(in.kernel).mu2 * in.component_d2(j, xj);
}

double ll_intercept_bias(const AsymptoticInputs& in) {
  in.validate();
  const KernelConstants kc = kernel_constants(in.kernel);
  const std::size_t q = in.quad_points;
  const std::size_t d = in.dims();
  const double mass = box_integral(in, q, [&](std::span<const double> x) { return in.weight(x); });
  double sum = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    const double curvature = box_integral(
        in, q, [&](std::span<const double> x) { return in.component_d2(k, x[k]) * in.weight(x); });
    auto w = [&](std::span<const double> x) { return in.weight(x); };
    const double w_lo = box_integral(in, q, w, k, in.lo[k]);
    const double w_hi = box_integral(in, q, w, k, in.hi[k]);
    const double d2 = in.delta[k] * in.delta[k];
    sum += d2 * 0.5 * kc.mu2 * curvature +
           d2 * kc.kappa * (in.component_d1(k, in.lo[k]) * w_lo - in.component_d1(k, in.hi[k]) * w_hi);
  }
  return -sum / mass;
}

}  // namespace sbgam
