#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sbgam/errors.hpp"
#include "sbgam/sim.hpp"
#include "test_support.hpp"

using namespace sbgam;

namespace {

double sample_correlation(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd a = x.col(0).array() - x.col(0).mean();
  const Eigen::VectorXd b = x.col(1).array() - x.col(1).mean();
  return a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
}

// Centering constants by nested Simpson over the truncated normal pair, independent of the library rules.
std::vector<double> simpson_centering(double rho, const Family& fam) {
  auto dens = [rho](double a, double b) {
    return std::exp(-(a * a - 2.0 * rho * a * b + b * b) / (2.0 * (1.0 - rho * rho)));
  };
  auto weight = [&](double a, double b) { return fam.psi(truth_raw(0, a) + truth_raw(1, b)) * dens(a, b); };
  const int m = 150;
  auto outer = [&](const std::function<double(double, double)>& g) {
    return test::simpson([&](double a) { return test::simpson([&](double b) { return g(a, b); }, -1.0, 1.0, m); },
                         -1.0, 1.0, m);
  };
  const double mass = outer(weight);
  return {outer([&](double a, double b) { return weight(a, b) * truth_raw(0, a); }) / mass,
          outer([&](double a, double b) { return weight(a, b) * truth_raw(1, b); }) / mass};
}

}  // namespace

TEST(Sim, ModelTable) {
  const SimModel m = SimModel::table(2, 2, 400, 9, 3);
  EXPECT_EQ(m.response, ResponseModel::poisson);
  EXPECT_EQ(m.covariate, CovariateModel::correlated);
  EXPECT_EQ(m.dims(), 5u);
  EXPECT_EQ(m.label(), "(2,2)+3");
  EXPECT_THROW(SimModel::table(3, 1, 100), ConfigError);
  EXPECT_THROW(SimModel::table(1, 1, 5).validate(), ConfigError);
}

TEST(Sim, TruncatedCorrelation) {
  auto rng = make_rng(3, 0);
  const Eigen::MatrixXd x = gen_covariates(SimModel::table(1, 2, 100000), rng);
  EXPECT_NEAR(sample_correlation(x), 0.682, 0.02);
  EXPECT_LE(x.cwiseAbs().maxCoeff(), 1.0);
  auto rng0 = make_rng(3, 1);
  const Eigen::MatrixXd x0 = gen_covariates(SimModel::table(1, 1, 100000, 1, 2), rng0);
  EXPECT_NEAR(sample_correlation(x0), 0.0, 0.02);
  EXPECT_LE(x0.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_NEAR(x0.col(3).array().square().mean(), 1.0 / 3.0, 0.01);
}

TEST(Sim, ResponseMeans) {
  const Eigen::MatrixXd zeros = Eigen::MatrixXd::Zero(100000, 2);
  auto rng = make_rng(5, 0);
  EXPECT_NEAR(gen_response(SimModel::table(1, 1, 100), zeros, rng).mean(), 0.5, 0.01);
  EXPECT_NEAR(gen_response(SimModel::table(2, 1, 100), zeros, rng).mean(), 1.0, 0.02);
  Eigen::MatrixXd half = Eigen::MatrixXd::Zero(100000, 2);
  half.col(0).setConstant(0.5);  // sin(pi / 2) = 1
  EXPECT_NEAR(gen_response(SimModel::table(2, 1, 100), half, rng).mean(), std::exp(1.0), 0.03);
}

TEST(Sim, DensityIsNormalizedOnTheBox) {
  for (int j : {1, 2}) {
    const CovariateDensity p(SimModel::table(1, j, 100));
    const double total = test::simpson(
        [&](double a) {
          return test::simpson(
              [&](double b) {
                const double x[2] = {a, b};
                return p(x);
              },
              -1.0, 1.0, 200);
        },
        -1.0, 1.0, 200);
    EXPECT_NEAR(total, 1.0, 1e-8);
    const double x[2] = {0.3, -0.2};
    const double h = 1e-6;
    const double xp[2] = {0.3 + h, -0.2};
    const double xm[2] = {0.3 - h, -0.2};
    EXPECT_NEAR(p.log_gradient(0, x), (std::log(p(xp)) - std::log(p(xm))) / (2.0 * h), 1e-6);
  }
  const double phi1 = std::erf(1.0 / std::numbers::sqrt2);
  EXPECT_NEAR(CovariateDensity(SimModel::table(1, 1, 100)).acceptance(), phi1 * phi1, 1e-10);
}

TEST(Sim, PoissonIntercepts) {
  EXPECT_NEAR(true_components(SimModel::table(2, 1, 100)).eta0, 0.7763, 5e-4);
  EXPECT_NEAR(true_components(SimModel::table(2, 2, 100)).eta0, 1.0410, 5e-4);
  const TruthComponents b = true_components(SimModel::table(1, 1, 100));
  EXPECT_NEAR(b.eta0, 0.0, 1e-12);
}

TEST(Sim, CenteringMatchesIndependentQuadrature) {
  for (int i : {1, 2}) {
    for (int j : {1, 2}) {
      const SimModel m = SimModel::table(i, j, 100);
      const TruthComponents t = true_components(m);
      const std::vector<double> c = simpson_centering(m.rho(), m.family());
      EXPECT_NEAR(t.centering[0], c[0], 1e-8) << m.label();
      EXPECT_NEAR(t.centering[1], c[1], 1e-8) << m.label();
    }
  }
}

TEST(Sim, CenteringWithExtraDimensions) {
  const TruthComponents t = true_components(SimModel::table(2, 1, 100, 1, 1));
  ASSERT_EQ(t.centering.size(), 3u);
  EXPECT_TRUE(t.published.empty());
  // The weight is even in x3 up to the 0.1 x3 tilt, so the centering of 0.1 x3 is small and positive.
  EXPECT_GT(t.centering[2], 0.0);
  EXPECT_LT(t.centering[2], 0.05);
}

TEST(Sim, FixtureBandwidth) {
  EXPECT_DOUBLE_EQ(fixture_bandwidth(100), 0.45);
  EXPECT_NEAR(fixture_bandwidth(400), 0.45 * std::pow(4.0, -0.2), 1e-15);
  EXPECT_THROW(fixture_bandwidth(0), ConfigError);
  const BandwidthRule r = fixture_rule(500);
  const Dataset data = to_unit_dataset(simulate(SimModel::table(1, 1, 500, 1, 1)));
  const std::vector<double> h = r.bandwidths(data);
  ASSERT_EQ(h.size(), 3u);
  EXPECT_DOUBLE_EQ(h[0], fixture_bandwidth(500));
  EXPECT_DOUBLE_EQ(h[2], 0.1);
  BandwidthRule wide;
  wide.factor = 10.0;
  EXPECT_THROW(wide.bandwidths(data), ConfigError);
}

TEST(Sim, KnownBoundsRescaling) {
  const SimulatedData s = simulate(SimModel::table(1, 1, 50));
  const Dataset d = to_unit_dataset(s);
  for (Eigen::Index i = 0; i < 50; ++i) EXPECT_NEAR(d.x(i, 0), (s.x(i, 0) + 1.0) / 2.0, 1e-15);
}

TEST(Metrics, CentralIntegral) {
  const Grid g(41);
  std::vector<double> one(41, 1.0);
  EXPECT_NEAR(central_integral(g, one, 0.9), 1.8, 1e-12);
  EXPECT_NEAR(central_integral(g, one, 1.0), 2.0, 1e-12);
  std::vector<double> x2(41);
  for (std::size_t k = 0; k < 41; ++k) x2[k] = std::pow(-1.0 + 2.0 * g.point(k), 2);
  EXPECT_NEAR(central_integral(g, x2, 0.9), 2.0 * 0.729 / 3.0, 1e-3);
}

TEST(Metrics, AdditiveDistanceMatchesTensorSum) {
  const Grid g(11);
  for (std::size_t d : {1u, 2u, 3u}) {
    std::vector<Curve> a(d, Curve(11)), b(d, Curve(11));
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < 11; ++k) {
        a[j][k] = std::sin(static_cast<double>(j + 1) * g.point(k));
        b[j][k] = 0.3 * g.point(k) * g.point(k) - 0.1 * static_cast<double>(j);
      }
    }
    double brute = 0.0;
    std::vector<std::size_t> idx(d, 0);
    while (true) {
      double e = 0.4 - 0.1;
      double w = 1.0;
      for (std::size_t j = 0; j < d; ++j) {
        e += a[j][idx[j]] - b[j][idx[j]];
        w *= 2.0 * g.weight(idx[j]);
      }
      brute += w * e * e;
      std::size_t j = 0;
      while (j < d && ++idx[j] == 11) idx[j++] = 0;
      if (j == d) break;
    }
    EXPECT_NEAR(additive_distance2(0.4, a, 0.1, b, g), brute, 1e-12) << d;
  }
}

TEST(Study, MiseDecompositionAndReproducibility) {
  const SimModel m = SimModel::table(1, 1, 100, 4);
  StudyConfig cfg;
  cfg.reps = 12;
  cfg.bandwidth = fixture_rule(100);
  cfg.threads = 1;
  const StudyResult a = run_study(m, cfg);
  cfg.threads = 3;
  const StudyResult b = run_study(m, cfg);
  EXPECT_EQ(a.bad_count, 0u);
  EXPECT_EQ(a.reps_used, 12u);
  for (std::size_t j = 0; j < 2; ++j) {
    EXPECT_NEAR(a.components[j].mise, a.components[j].isb + a.components[j].iv, 1e-12);
    EXPECT_EQ(a.mean_curves[j], b.mean_curves[j]);
  }
  EXPECT_EQ(a.mise, b.mise);
  EXPECT_NEAR(a.mean_bandwidth, 0.45, 1e-15);
  const SimulatedData s1 = simulate(m, 7);
  const SimulatedData s2 = simulate(m, 7);
  EXPECT_EQ(s1.x, s2.x);
  EXPECT_EQ(s1.y, s2.y);
  EXPECT_NE(simulate(m, 8).x, s1.x);
}

TEST(Study, NoBadFitsOnSmallModel) {
  StudyConfig cfg;
  cfg.reps = 20;
  cfg.bandwidth = fixture_rule(100);
  for (Estimator e : {Estimator::nw, Estimator::ll}) {
    cfg.estimator = e;
    const StudyResult r = run_study(SimModel::table(1, 1, 100), cfg);
    EXPECT_EQ(r.bad_count, 0u) << to_string(e);
    EXPECT_GT(r.mise, 0.0);
  }
}

TEST(Study, FailedFitsCountAsBad) {
  StudyConfig cfg;
  cfg.reps = 4;
  cfg.bandwidth = fixture_rule(100);
  cfg.fit.max_outer = 1;
  cfg.fit.tol_outer = 1e-14;
  EXPECT_THROW(run_study(SimModel::table(1, 1, 100), cfg), ConvergenceError);
  const ReplicationOutcome o = run_replication(SimModel::table(1, 1, 100), 0, cfg,
                                               true_components(SimModel::table(1, 1, 100)));
  EXPECT_TRUE(o.failed);
  EXPECT_TRUE(o.bad);
  EXPECT_FALSE(o.error.empty());
}
