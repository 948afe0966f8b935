#include <gtest/gtest.h>

#include <cmath>

#include "sbgam/errors.hpp"
#include "sbgam/ll_fit.hpp"
#include "sbgam/nw_fit.hpp"
#include "sbgam/oracles.hpp"
#include "test_support.hpp"

using namespace sbgam;

namespace {

FitConfig tight() {
  FitConfig c;
  c.tol_outer = 1e-10;
  c.tol_inner = 1e-12;
  c.max_inner = 1000;
  return c;
}

LlPredictor wavy(std::size_t d, const Grid& g) {
  LlPredictor eta = LlPredictor::constant(0.3, d, g.size());
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      eta.components0[j][k] = 0.4 * std::sin(2.0 * g.point(k) + static_cast<double>(j));
      eta.components1[j][k] = 0.05 * std::cos(3.0 * g.point(k));
    }
  }
  return eta;
}

}  // namespace

TEST(LlPredictor, EvaluationExamples) {
  Eigen::MatrixXd x(2, 2);
  x << 0.0, 1.0, 1.0, 0.0;
  const SmoothingContext ctx(rescale_covariates(x, Eigen::VectorXd::Zero(2)), {BaseKernel::epanechnikov, {0.2, 0.5}},
                             Grid(11));
  LlPredictor eta = LlPredictor::constant(1.0, 2, 11);
  eta.components0[0][5] = 0.25;
  eta.components0[1][2] = -0.5;
  eta.components1[0][5] = 2.0;
  eta.components1[1][2] = 1.0;
  const std::size_t cell[2] = {5, 2};
  // z = (0 - 0.5) / 0.2 = -2.5 and (1 - 0.2) / 0.5 = 1.6
  EXPECT_NEAR(ll_predictor_eval(eta, ctx, 0, cell), 1.0 + 0.25 - 0.5 + 2.0 * -2.5 + 1.6, 1e-14);
  EXPECT_NEAR(eta.level(cell), 0.75, 1e-15);
}

TEST(LlMarginals, MassAndBlockConsistency) {
  const SmoothingContext ctx(test::make_dataset(FamilyKind::poisson_log, 3, 150, 31),
                             {BaseKernel::epanechnikov, {0.25, 0.3, 0.2}}, Grid(21));
  const Grid& g = ctx.grid();
  const LlMarginals gm = ll_marginals(wavy(3, g), ctx, Family::gaussian_identity());
  EXPECT_NEAR(gm.weights.mass, 1.0, 1e-12);

  const LlMarginals m = ll_marginals(wavy(3, g), ctx, Family::poisson_log());
  const auto& w = m.weights;
  Eigen::Map<const Eigen::VectorXd> gw(g.weights().data(), 21);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(trapezoid_integrate(g, w.v00[j]), w.mass, 1e-10 * w.mass);
    for (std::size_t l = 0; l < 3; ++l) {
      if (l == j) continue;
      const auto& b = w.block(j, l);
      const auto& t = w.block(l, j);
      EXPECT_LT((b.a00 - t.a00.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((b.a01 - t.a10.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      EXPECT_LT((b.a11 - t.a11.transpose()).cwiseAbs().maxCoeff(), 1e-12);
      const Eigen::VectorXd v00 = b.a00 * gw;
      const Eigen::VectorXd v0j = b.a10 * gw;
      for (std::size_t k = 0; k < 21; ++k) {
        const auto e = static_cast<Eigen::Index>(k);
        EXPECT_NEAR(v00(e), w.v00[j][k], 1e-10);
        EXPECT_NEAR(v0j(e), w.v01[j][k], 1e-10);
      }
    }
    for (std::size_t k = 0; k < 21; ++k) {
      EXPECT_GT(w.v00[j][k] * w.v11[j][k] - w.v01[j][k] * w.v01[j][k], 0.0);
    }
  }
}

TEST(LlMarginals, ZeroSlopeSqMatchesNw) {
  const auto fx = test::standard_fixtures()[5];
  const SmoothingContext ctx = test::make_context(fx);
  const Family fam = test::family_of(fx.kind);
  LlPredictor eta = wavy(2, ctx.grid());
  for (auto& c : eta.components1) std::fill(c.begin(), c.end(), 0.0);
  const AdditivePredictor nw{eta.eta00, eta.components0};
  EXPECT_NEAR(smoothed_ql_ll(eta, ctx, fam), smoothed_ql_nw(nw, ctx, fam), 1e-12);
}

TEST(LlInner, OneDimensionNeedsOneSweep) {
  const auto fx = test::standard_fixtures()[2];
  const SmoothingContext ctx = test::make_context(fx);
  const LlMarginals m = ll_marginals(wavy(1, ctx.grid()), ctx, test::family_of(fx.kind));
  const LlInnerResult r = ll_inner_solve(ctx.grid(), m.weights, m.zeta0, m.zeta1, m.score00, tight());
  EXPECT_EQ(r.sweeps, 1u);
}

TEST(LlInner, ZeroScoresGiveZeroUpdate) {
  const auto fx = test::standard_fixtures()[5];
  const SmoothingContext ctx = test::make_context(fx);
  const LlMarginals m = ll_marginals(wavy(2, ctx.grid()), ctx, test::family_of(fx.kind));
  const std::vector<Curve> zero(2, Curve(41, 0.0));
  const LlInnerResult r = ll_inner_solve(ctx.grid(), m.weights, zero, zero, 0.0, tight());
  EXPECT_EQ(r.xi00, 0.0);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_EQ(test::sup(r.xi0[j]), 0.0);
    EXPECT_EQ(test::sup(r.xi1[j]), 0.0);
  }
}

TEST(LlOuter, ZeroStepIsAFixedPointAndSlopesAreNotRecentered) {
  const auto fx = test::standard_fixtures()[5];
  const SmoothingContext ctx = test::make_context(fx);
  const Family fam = test::family_of(fx.kind);
  const LlPredictor eta = run_ll_steps(ctx, fam, FitConfig{}, 2).predictor();
  LlInnerResult zero;
  zero.xi0.assign(2, Curve(41, 0.0));
  zero.xi1.assign(2, Curve(41, 0.0));
  const LlPredictor same = ll_outer_update(eta, zero, ctx, fam);
  EXPECT_NEAR(same.eta00, eta.eta00, 1e-12);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_LT(test::max_abs_diff(same.components0[j], eta.components0[j]), 1e-12);
    EXPECT_EQ(same.components1[j], eta.components1[j]);
  }

  LlInnerResult step = zero;
  step.xi00 = 0.1;
  for (std::size_t k = 0; k < 41; ++k) {
    step.xi0[0][k] = 0.2 + 0.1 * ctx.grid().point(k);
    step.xi1[1][k] = 0.03 * ctx.grid().point(k);
  }
  LlMarginals next;
  const LlPredictor moved = ll_outer_update(eta, step, ctx, fam, 1.0, &next);
  for (std::size_t k = 0; k < 41; ++k) {
    EXPECT_EQ(moved.components1[0][k], eta.components1[0][k]);
    EXPECT_EQ(moved.components1[1][k], eta.components1[1][k] + step.xi1[1][k]);
  }
  for (double c : ll_constraint_values(moved, ctx.grid(), next.weights)) EXPECT_LT(std::abs(c), 1e-12);
}

TEST(LlFit, GaussianOneStepIsTheLeastSquaresSolution) {
  const Dataset data = test::make_dataset(FamilyKind::gaussian_identity, 2, 80, 23);
  const Grid g(11);
  const KernelSpec ks{BaseKernel::epanechnikov, {0.35, 0.3}};
  const SmoothingContext ctx(data, ks, g);
  const LlFit one = run_ll_steps(ctx, Family::gaussian_identity(), tight(), 1);
  const LsqSbfSolution lsq = lsq_sbf_oracle(data, ks, g, Estimator::ll);
  EXPECT_NEAR(one.eta00, lsq.eta0, 1e-8);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_LT(test::max_abs_diff(one.components0[j], lsq.components0[j]), 1e-8);
    EXPECT_LT(test::max_abs_diff(one.components1[j], lsq.components1[j]), 1e-8);
  }
  const LlFit two = run_ll_steps(ctx, Family::gaussian_identity(), tight(), 2);
  EXPECT_LT(two.diagnostics.step_sup_norms[1], 1e-9);
}

TEST(LlFit, ConstantResponse) {
  const Dataset base = test::make_dataset(FamilyKind::gaussian_identity, 2, 40, 8);
  Dataset data = base;
  data.y.setConstant(-0.6);
  const LlFit fit = fit_ll(SmoothingContext(data, {BaseKernel::epanechnikov, {0.4, 0.4}}, Grid(21)),
                           Family::gaussian_identity());
  EXPECT_NEAR(fit.eta00, -0.6, 1e-12);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_LT(test::sup(fit.components0[j]), 1e-12);
    EXPECT_LT(test::sup(fit.components1[j]), 1e-12);
  }
}

TEST(LlFit, MatchesPointwiseOracleInOneDimension) {
  for (FamilyKind kind : {FamilyKind::gaussian_identity, FamilyKind::bernoulli_logit, FamilyKind::poisson_log}) {
    const Dataset data = test::make_dataset(kind, 1, 120, 606);
    const Grid g(41);
    const KernelSpec ks{BaseKernel::epanechnikov, {0.3}};
    const Family fam = test::family_of(kind);
    const LlFit fit = fit_ll(SmoothingContext(data, ks, g), fam, tight());
    const PointwiseCurve o = pointwise_1d_oracle(data, ks, g, fam, OracleOrder::linear);
    const Curve slope = fit.derivative(0);
    std::size_t compared = 0;
    for (std::size_t k = 4; k <= 36; ++k) {
      if (!o.converged[k]) continue;
      ++compared;
      EXPECT_NEAR(fit.eta00 + fit.components0[0][k], o.level[k], 1e-6) << fam.name();
      EXPECT_NEAR(slope[k], o.slope[k], 1e-5) << fam.name();
    }
    EXPECT_GE(compared, 30u);
  }
}

TEST(LlFit, ConstraintsOnFixtures) {
  for (const auto& fx : test::standard_fixtures()) {
    const LlFit fit = fit_ll(test::make_context(fx), test::family_of(fx.kind));
    const FitDiagnostics& d = fit.diagnostics;
    ASSERT_TRUE(d.converged) << fx.name;
    for (double r : d.constraint_residuals) EXPECT_LT(r, 1e-8) << fx.name;
    EXPECT_GE(d.sq, d.sq_history.front()) << fx.name;
    EXPECT_EQ(fit.bandwidths.size(), fx.d);
  }
}

TEST(LlFit, DerivativeIsUnscaled) {
  const auto fx = test::standard_fixtures()[0];
  const LlFit fit = fit_ll(test::make_context(fx), test::family_of(fx.kind));
  const Curve d = fit.derivative(0);
  for (std::size_t k = 0; k < d.size(); ++k) EXPECT_NEAR(d[k] * fx.h, fit.components1[0][k], 1e-14);
}

TEST(LlFit, Errors) {
  Eigen::MatrixXd gap(20, 1);
  for (Eigen::Index i = 0; i < 19; ++i) gap(i, 0) = 0.005 * i;
  gap(19, 0) = 1.0;
  const SmoothingContext sparse(rescale_covariates(gap, Eigen::VectorXd::LinSpaced(20, 0.0, 2.0)),
                                {BaseKernel::epanechnikov, {0.05}}, Grid(41));
  EXPECT_THROW(fit_ll(sparse, Family::gaussian_identity()), DegenerateWeightError);

  FitConfig cfg;
  cfg.max_outer = 1;
  cfg.tol_outer = 1e-14;
  EXPECT_THROW(fit_ll(test::make_context(test::standard_fixtures()[4]), Family::bernoulli_logit(), cfg),
               ConvergenceError);
  EXPECT_THROW(run_ll_steps(test::make_context(test::standard_fixtures()[0]), Family::gaussian_identity(), cfg, 0),
               ConfigError);
}
