#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sbgam/errors.hpp"
#include "sbgam/grid.hpp"
#include "sbgam/quadrature.hpp"
#include "test_support.hpp"

using namespace sbgam;

TEST(Grid, PointsAndWeights) {
  const Grid g(41);
  EXPECT_EQ(g.size(), 41u);
  EXPECT_DOUBLE_EQ(g.step(), 0.025);
  double s = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    s += g.weight(k);
    EXPECT_NEAR(g.point(k), 0.025 * static_cast<double>(k), 1e-15);
  }
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(g.weight(0), 0.0125);
  EXPECT_THROW(Grid(4), ConfigError);
}

TEST(Grid, TrapezoidExamples) {
  const Grid g(41);
  std::vector<double> one(41, 1.0), x(41), x2(41);
  for (std::size_t k = 0; k < 41; ++k) {
    x[k] = g.point(k);
    x2[k] = x[k] * x[k];
  }
  EXPECT_NEAR(trapezoid_integrate(g, one), 1.0, 1e-15);
  EXPECT_NEAR(trapezoid_integrate(g, x), 0.5, 1e-15);
  EXPECT_NEAR(trapezoid_integrate(g, x2), 0.3334375, 1e-15);
  EXPECT_THROW(trapezoid_integrate(g, std::vector<double>(40, 1.0)), InternalError);
}

TEST(Rescale, AffineMapAndRoundTrip) {
  Eigen::MatrixXd raw(3, 2);
  raw << -1.0, 0.0, 0.0, 0.25, 1.0, 1.0;
  const Dataset d = rescale_covariates(raw, Eigen::VectorXd::Zero(3));
  EXPECT_DOUBLE_EQ(d.x(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(d.x(1, 0), 0.5);
  EXPECT_DOUBLE_EQ(d.x(2, 0), 1.0);
  EXPECT_DOUBLE_EQ(d.x(1, 1), 0.25);
  EXPECT_DOUBLE_EQ(d.transform[1].min, 0.0);
  EXPECT_DOUBLE_EQ(d.transform[1].max, 1.0);

  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(5.0, 30.0);
  Eigen::MatrixXd big(50, 3);
  for (Eigen::Index i = 0; i < 50; ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) big(i, j) = nd(rng);
  }
  const Dataset r = rescale_covariates(big, Eigen::VectorXd::Zero(50));
  EXPECT_NO_THROW(r.validate());
  EXPECT_LT((original_covariates(r) - big).cwiseAbs().maxCoeff(), 1e-12 * 100.0);
}

TEST(Rescale, ConstantColumnNamesTheColumn) {
  Eigen::MatrixXd raw(3, 2);
  raw << 0.1, 2.0, 0.5, 2.0, 0.9, 2.0;
  try {
    rescale_covariates(raw, Eigen::VectorXd::Zero(3), {"age", "dose"});
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("dose"), std::string::npos);
  }
}

TEST(Marginalize, Examples) {
  const Grid g(11);
  const auto c1 = marginalize_curve(g, 2, [&](std::span<const std::size_t> c) { return g.point(c[0]); }, 0);
  for (std::size_t k = 0; k < 11; ++k) EXPECT_NEAR(c1[k], g.point(k), 1e-15);

  auto a = [](double t) { return 1.0 + t; };
  auto b = [](double t) { return std::exp(t); };
  auto cc = [](double t) { return t * t + 0.3; };
  const CellFunction f = [&](std::span<const std::size_t> c) {
    return a(g.point(c[0])) * b(g.point(c[1])) * cc(g.point(c[2]));
  };
  std::vector<double> cv(11);
  for (std::size_t k = 0; k < 11; ++k) cv[k] = cc(g.point(k));
  const double ic = trapezoid_integrate(g, cv);
  const Eigen::MatrixXd s = marginalize_surface(g, 3, f, 0, 1);
  for (std::size_t p = 0; p < 11; ++p) {
    for (std::size_t q = 0; q < 11; ++q) {
      EXPECT_NEAR(s(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)),
                  a(g.point(p)) * b(g.point(q)) * ic, 1e-13);
    }
  }
  const double total = marginalize_total(g, 3, f);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(trapezoid_integrate(g, marginalize_curve(g, 3, f, j)), total, 1e-13);
  }
}

TEST(Marginalize, StreamingMatchesFullTensor) {
  for (std::size_t d = 1; d <= 3; ++d) {
    const Dataset data = test::make_dataset(FamilyKind::poisson_log, d, 40, 100 + d);
    const Grid g(11);
    const KernelSpec ks{BaseKernel::epanechnikov, std::vector<double>(d, 0.3)};
    const KernelRowCache rows(data, ks, g);
    auto value = [&](std::size_t i, std::span<const std::size_t> c) {
      double v = data.y(static_cast<Eigen::Index>(i)) + 0.5;
      for (std::size_t j = 0; j < c.size(); ++j) v *= 1.0 + g.point(c[j]);
      return v;
    };
    const MarginalSet streamed = stream_marginals(
        g, rows, [&](std::size_t i, std::span<const std::size_t> c, double k) { return value(i, c) * k; }, true);
    const CellFunction naive = [&](std::span<const std::size_t> c) {
      double s = 0.0;
      for (std::size_t i = 0; i < data.samples(); ++i) {
        double k = 1.0;
        for (std::size_t j = 0; j < d; ++j) k *= rows.row(j, i).at(c[j]);
        s += value(i, c) * k;
      }
      return s;
    };
    const MarginalSet full = marginalize_all(g, d, naive, true);
    EXPECT_NEAR(streamed.total, full.total, 1e-12 * std::abs(full.total));
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < 11; ++k) EXPECT_NEAR(streamed.curves[j][k], full.curves[j][k], 1e-12);
    }
    for (std::size_t p = 0; p < full.surfaces.size(); ++p) {
      EXPECT_LT((streamed.surfaces[p] - full.surfaces[p]).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(Marginalize, FubiniConsistency) {
  const Dataset data = test::make_dataset(FamilyKind::gaussian_identity, 3, 80, 7);
  const Grid g(21);
  const KernelRowCache rows(data, {BaseKernel::epanechnikov, {0.2, 0.3, 0.25}}, g);
  const MarginalSet m = stream_marginals(
      g, rows, [](std::size_t, std::span<const std::size_t>, double k) { return k; }, true);
  EXPECT_NEAR(m.total, 80.0, 1e-10);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(trapezoid_integrate(g, m.curves[j]), m.total, 1e-10);
    for (std::size_t l = 0; l < 3; ++l) {
      if (l == j) continue;
      const Eigen::MatrixXd s = m.surface(j, l);
      Eigen::Map<const Eigen::VectorXd> w(g.weights().data(), 21);
      const Eigen::VectorXd over_l = s * w;
      for (std::size_t k = 0; k < 21; ++k) {
        EXPECT_NEAR(over_l(static_cast<Eigen::Index>(k)), m.curves[j][k], 1e-10);
      }
      EXPECT_NEAR(w.dot(s * w), m.total, 1e-10);
    }
  }
}

TEST(Marginalize, AccumulatorMergeIsOrderIndependent) {
  const Grid g(11);
  MarginalAccumulator a(g, 2, true), b(g, 2, true), all(g, 2, true);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> idx(0, 10);
  std::uniform_real_distribution<double> val(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const std::size_t cell[2] = {idx(rng), idx(rng)};
    const double v = val(rng);
    (i % 2 ? a : b).add(cell, v);
    all.add(cell, v);
  }
  a.merge(b);
  EXPECT_NEAR(a.result().total, all.result().total, 1e-12);
  EXPECT_LT((a.result().surfaces[0] - all.result().surfaces[0]).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Quadrature, GaussLegendreIsExactForPolynomials) {
  const GaussRule r = gauss_legendre(8, -1.0, 2.0);
  for (int p = 0; p <= 15; ++p) {
    double s = 0.0;
    for (std::size_t k = 0; k < r.size(); ++k) s += r.weights[k] * std::pow(r.nodes[k], p);
    const double exact = (std::pow(2.0, p + 1) - std::pow(-1.0, p + 1)) / (p + 1);
    EXPECT_NEAR(s, exact, 1e-11 * std::max(1.0, std::abs(exact)));
  }
  EXPECT_THROW(gauss_legendre(0), ConfigError);
}
