#include "sbgam/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "sbgam/errors.hpp"

namespace sbgam {

namespace {

constexpr double kPredictorLimit = 30.0;

double logistic(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// log(1 + e^u) without overflow.
double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

std::string describe(std::string_view what, double value) {
  std::ostringstream os;
  os << what << " " << value;
  return os.str();
}

}  // namespace

Family Family::gaussian_identity() { return Family(FamilyKind::gaussian_identity); }
Family Family::bernoulli_logit() { return Family(FamilyKind::bernoulli_logit); }
Family Family::poisson_log() { return Family(FamilyKind::poisson_log); }

Family Family::custom(CustomFamilySpec spec) {
  if (!spec.link || !spec.inverse_link || !spec.link_derivative || !spec.variance || !spec.q2) {
    throw ConfigError("custom family '" + spec.name + "' is missing a required map");
  }
  Family f(FamilyKind::custom);
  f.custom_ = std::make_shared<const CustomFamilySpec>(std::move(spec));
  return f;
}

Family Family::from_name(std::string_view name) {
  if (name == "gaussian_identity" || name == "gaussian") return gaussian_identity();
  if (name == "bernoulli_logit" || name == "bernoulli") return bernoulli_logit();
  if (name == "poisson_log" || name == "poisson") return poisson_log();
  throw InputError("unknown family '" + std::string(name) + "'");
}

std::string_view Family::name() const noexcept {
  switch (kind_) {
    case FamilyKind::gaussian_identity:
      return "gaussian_identity";
    case FamilyKind::bernoulli_logit:
      return "bernoulli_logit";
    case FamilyKind::poisson_log:
      return "poisson_log";
    case FamilyKind::custom:
      return custom_->name;
  }
  return "unknown";
}

bool Family::canonical() const noexcept {
  return kind_ == FamilyKind::custom ? custom_->canonical : true;
}

double Family::clamp(double u) const noexcept {
  switch (kind_) {
    case FamilyKind::bernoulli_logit:
      return std::clamp(u, -kPredictorLimit, kPredictorLimit);
    case FamilyKind::poisson_log:
      return std::min(u, kPredictorLimit);
    default:
      return u;
  }
}

bool Family::response_in_range(double y) const {
  if (!std::isfinite(y)) return false;
  switch (kind_) {
    case FamilyKind::gaussian_identity:
      return true;
    case FamilyKind::bernoulli_logit:
      return y >= 0.0 && y <= 1.0;
    case FamilyKind::poisson_log:
      return y >= 0.0;
    case FamilyKind::custom:
      return !custom_->response_in_range || custom_->response_in_range(y);
  }
  return false;
}

void Family::check_response(double y) const {
  if (!response_in_range(y)) {
    throw InputError(describe(std::string("response outside the range of family ") + std::string(name()) + ":", y));
  }
}

FamilyEval Family::eval(double u, double y) const {
  if (!std::isfinite(u)) throw InputError(describe("non-finite linear predictor", u));
  check_response(y);
  u = clamp(u);
  switch (kind_) {
    case FamilyKind::gaussian_identity: {
      const double r = y - u;
      return {-0.5 * r * r, r, -1.0};
    }
    case FamilyKind::bernoulli_logit: {
      const double p = logistic(u);
      return {y * u - softplus(u), y - p, -p * (1.0 - p)};
    }
    case FamilyKind::poisson_log: {
      const double mu = std::exp(u);
      return {y * u - mu, y - mu, -mu};
    }
    case FamilyKind::custom: {
      const auto& c = *custom_;
      const double m = c.inverse_link(u);
      const double q1 = (y - m) / (c.variance(m) * c.link_derivative(m));
      const double q = c.quasi_likelihood ? c.quasi_likelihood(m, y) : std::numeric_limits<double>::quiet_NaN();
      return {q, q1, c.q2(u, y)};
    }
  }
  throw InternalError("unhandled family kind");
}

double Family::link(double m) const {
  switch (kind_) {
    case FamilyKind::gaussian_identity:
      return m;
    case FamilyKind::bernoulli_logit:
      return std::log(m / (1.0 - m));
    case FamilyKind::poisson_log:
      return std::log(m);
    case FamilyKind::custom:
      return custom_->link(m);
  }
  return m;
}

double Family::inverse_link(double u) const {
  switch (kind_) {
    case FamilyKind::gaussian_identity:
      return u;
    case FamilyKind::bernoulli_logit:
      return logistic(u);
    case FamilyKind::poisson_log:
      return std::exp(u);
    case FamilyKind::custom:
      return custom_->inverse_link(u);
  }
  return u;
}

double Family::link_derivative(double m) const {
  switch (kind_) {
    case FamilyKind::gaussian_identity:
      return 1.0;
    case FamilyKind::bernoulli_logit:
      return 1.0 / (m * (1.0 - m));
    case FamilyKind::poisson_log:
      return 1.0 / m;
    case FamilyKind::custom:
      return custom_->link_derivative(m);
  }
  return 1.0;
}

double Family::variance(double m) const {
  switch (kind_) {
    case FamilyKind::gaussian_identity:
      return 1.0;
    case FamilyKind::bernoulli_logit:
      return m * (1.0 - m);
    case FamilyKind::poisson_log:
      return m;
    case FamilyKind::custom:
      return custom_->variance(m);
  }
  return 1.0;
}

double Family::psi(double u) const {
  const double m = inverse_link(u);
  const double gd = link_derivative(m);
  return 1.0 / (variance(m) * gd * gd);
}

double Family::mean_d1(double u) const {
  switch (kind_) {
    case FamilyKind::gaussian_identity:
      return 1.0;
    case FamilyKind::bernoulli_logit: {
      const double p = logistic(u);
      return p * (1.0 - p);
    }
    case FamilyKind::poisson_log:
      return std::exp(u);
    case FamilyKind::custom:
      return 1.0 / custom_->link_derivative(custom_->inverse_link(u));
  }
  return 1.0;
}

double Family::mean_d2(double u) const {
  switch (kind_) {
    case FamilyKind::gaussian_identity:
      return 0.0;
    case FamilyKind::bernoulli_logit: {
      const double p = logistic(u);
      return p * (1.0 - p) * (1.0 - 2.0 * p);
    }
    case FamilyKind::poisson_log:
      return std::exp(u);
    case FamilyKind::custom: {
      const double step = 1e-5 * std::max(1.0, std::abs(u));
      return (mean_d1(u + step) - mean_d1(u - step)) / (2.0 * step);
    }
  }
  return 0.0;
}

}  // namespace sbgam
