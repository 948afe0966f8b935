#pragma once

#include <functional>
#include <memory>
#include <string>
#include <string_view>

namespace sbgam {

enum class FamilyKind { gaussian_identity, bernoulli_logit, poisson_log, custom };

/// Q(g^{-1}(u), y) and its first two derivatives in the linear predictor u.
struct FamilyEval {
  double Q = 0.0;
  double q1 = 0.0;
  double q2 = 0.0;
};

/// User-supplied quasi-likelihood family. All maps are scalar; q2 must be the analytic u-derivative of
/// q1(u, y) = (y - m) / (V(m) g'(m)) with m = g^{-1}(u).
struct CustomFamilySpec {
  std::string name = "custom";
  std::function<double(double)> link;             ///< g(m)
  std::function<double(double)> inverse_link;     ///< g^{-1}(u)
  std::function<double(double)> link_derivative;  ///< g'(m)
  std::function<double(double)> variance;         ///< V(m)
  std::function<double(double, double)> quasi_likelihood;  ///< Q(m, y)
  std::function<double(double, double)> q2;               ///< q2(u, y)
  /// Optional response-range check; every finite y is accepted when empty.
  std::function<bool(double)> response_in_range;
  bool canonical = false;
};

/// Link/variance bundle of a quasi-likelihood model.
class Family {
 public:
  static Family gaussian_identity();
  static Family bernoulli_logit();
  static Family poisson_log();
  static Family custom(CustomFamilySpec spec);
  /// Built-in family by name; throws InputError for unknown names.
  static Family from_name(std::string_view name);

  FamilyKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept;
  /// True when q2 does not depend on the response.
  bool canonical() const noexcept;

  /// Q, q1, q2 at (u, y). Throws InputError for non-finite u or y out of range.
  FamilyEval eval(double u, double y) const;

  /// Linear-predictor clamp: [-30, 30] for logit, (-inf, 30] for log, none otherwise.
  double clamp(double u) const noexcept;
  void check_response(double y) const;
  bool response_in_range(double y) const;

  double link(double m) const;
  double inverse_link(double u) const;
  double link_derivative(double m) const;
  double variance(double m) const;
  /// psi(u) = -q2(u, g^{-1}(u)) = 1 / (V(m) g'(m)^2).
  double psi(double u) const;
  /// First and second derivatives of the mean m(u) = g^{-1}(u).
  double mean_d1(double u) const;
  double mean_d2(double u) const;

 private:
  explicit Family(FamilyKind kind) : kind_(kind) {}

  FamilyKind kind_;
  std::shared_ptr<const CustomFamilySpec> custom_;
};

}  // namespace sbgam
