#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "sbgam/errors.hpp"
#include "sbgam/family.hpp"

using namespace sbgam;

namespace {

struct Probe {
  Family fam;
  std::vector<double> ys;
};

Family gamma_log() {
  CustomFamilySpec s;
  s.name = "gamma_log";
  s.link = [](double m) { return std::log(m); };
  s.inverse_link = [](double u) { return std::exp(u); };
  s.link_derivative = [](double m) { return 1.0 / m; };
  s.variance = [](double m) { return m * m; };
  s.quasi_likelihood = [](double m, double y) { return -y / m - std::log(m); };
  s.q2 = [](double u, double y) { return -y * std::exp(-u); };
  s.response_in_range = [](double y) { return y > 0.0; };
  return Family::custom(s);
}

std::vector<Probe> probes() {
  return {{Family::gaussian_identity(), {-3.0, -0.5, 0.0, 1.2, 4.0}},
          {Family::bernoulli_logit(), {0.0, 1.0}},
          {Family::poisson_log(), {0.0, 1.0, 3.0, 10.0}},
          {gamma_log(), {0.2, 1.0, 5.0}}};
}

}  // namespace

TEST(Family, Examples) {
  FamilyEval e = Family::gaussian_identity().eval(2.0, 3.0);
  EXPECT_DOUBLE_EQ(e.q1, 1.0);
  EXPECT_DOUBLE_EQ(e.q2, -1.0);
  e = Family::bernoulli_logit().eval(0.0, 1.0);
  EXPECT_DOUBLE_EQ(e.q1, 0.5);
  EXPECT_DOUBLE_EQ(e.q2, -0.25);
  e = Family::poisson_log().eval(0.0, 2.0);
  EXPECT_DOUBLE_EQ(e.q1, 1.0);
  EXPECT_DOUBLE_EQ(e.q2, -1.0);
}

TEST(Family, Q2MatchesFiniteDifferenceOfQ1) {
  const double step = 1e-5;
  for (const Probe& p : probes()) {
    for (double u = -4.0; u <= 4.0; u += 0.25) {
      for (double y : p.ys) {
        const double fd = (p.fam.eval(u + step, y).q1 - p.fam.eval(u - step, y).q1) / (2.0 * step);
        const double q2 = p.fam.eval(u, y).q2;
        EXPECT_LT(std::abs(fd - q2), 1e-6 * std::abs(q2)) << p.fam.name() << " u=" << u << " y=" << y;
      }
    }
  }
}

TEST(Family, Q1MatchesFiniteDifferenceOfQ) {
  const double step = 1e-5;
  for (const Probe& p : probes()) {
    for (double u = -3.0; u <= 3.0; u += 0.5) {
      for (double y : p.ys) {
        const double fd = (p.fam.eval(u + step, y).Q - p.fam.eval(u - step, y).Q) / (2.0 * step);
        EXPECT_NEAR(fd, p.fam.eval(u, y).q1, 1e-6 * std::max(1.0, std::abs(fd)));
      }
    }
  }
}

TEST(Family, Q2IsNegative) {
  for (const Probe& p : probes()) {
    for (double u = -30.0; u <= 30.0; u += 0.5) {
      for (double y : p.ys) EXPECT_LT(p.fam.eval(u, y).q2, 0.0);
    }
  }
}

TEST(Family, PsiIsInverseVarianceTimesSquaredLinkDerivative) {
  for (const Probe& p : probes()) {
    for (double u = -3.0; u <= 3.0; u += 0.25) {
      const double m = p.fam.inverse_link(u);
      const double gd = p.fam.link_derivative(m);
      const double expected = 1.0 / (p.fam.variance(m) * gd * gd);
      EXPECT_NEAR(p.fam.psi(u), expected, 1e-12 * std::max(1.0, expected));
      EXPECT_NEAR(p.fam.psi(u), -p.fam.eval(u, m).q2, 1e-12 * std::max(1.0, expected));
    }
  }
}

TEST(Family, MeanDerivatives) {
  for (const Probe& p : probes()) {
    for (double u = -2.0; u <= 2.0; u += 0.5) {
      const double h = 1e-5;
      const double d1 = (p.fam.inverse_link(u + h) - p.fam.inverse_link(u - h)) / (2.0 * h);
      const double d2 = (p.fam.mean_d1(u + h) - p.fam.mean_d1(u - h)) / (2.0 * h);
      EXPECT_NEAR(p.fam.mean_d1(u), d1, 1e-8 * std::max(1.0, std::abs(d1)));
      EXPECT_NEAR(p.fam.mean_d2(u), d2, 1e-6 * std::max(1.0, std::abs(d2)));
    }
  }
}

TEST(Family, LinkIsMonotone) {
  for (const Probe& p : probes()) {
    double prev = -std::numeric_limits<double>::infinity();
    for (double u = -5.0; u <= 5.0; u += 0.1) {
      const double m = p.fam.inverse_link(u);
      EXPECT_GT(m, prev);
      EXPECT_NEAR(p.fam.link(m), u, 1e-9);
      EXPECT_GT(p.fam.variance(m), 0.0);
      prev = m;
    }
  }
}

TEST(Family, Clamp) {
  EXPECT_EQ(Family::bernoulli_logit().clamp(45.0), 30.0);
  EXPECT_EQ(Family::bernoulli_logit().clamp(-45.0), -30.0);
  EXPECT_EQ(Family::poisson_log().clamp(45.0), 30.0);
  EXPECT_EQ(Family::poisson_log().clamp(-45.0), -45.0);
  EXPECT_EQ(Family::gaussian_identity().clamp(1e6), 1e6);
}

TEST(Family, InputErrors) {
  EXPECT_THROW(Family::poisson_log().eval(0.0, -1.0), InputError);
  EXPECT_THROW(Family::bernoulli_logit().eval(0.0, 2.0), InputError);
  EXPECT_THROW(Family::gaussian_identity().eval(std::nan(""), 1.0), InputError);
  EXPECT_THROW(Family::from_name("binomial_probit"), InputError);
  EXPECT_EQ(Family::from_name("poisson").kind(), FamilyKind::poisson_log);
}

TEST(Family, CanonicalFlag) {
  EXPECT_TRUE(Family::bernoulli_logit().canonical());
  EXPECT_TRUE(Family::poisson_log().canonical());
  EXPECT_TRUE(Family::gaussian_identity().canonical());
  EXPECT_FALSE(gamma_log().canonical());
}
