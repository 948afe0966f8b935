#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace sbgam {

/// Symmetric base kernels supported on [-1, 1].
enum class BaseKernel { epanechnikov, quartic, triangular };

std::string_view to_string(BaseKernel kernel);
/// Parses "epanechnikov", "quartic" or "triangular"; throws ConfigError otherwise.
BaseKernel parse_kernel(std::string_view name);

/// Base kernel and one bandwidth per covariate, in rescaled [0, 1] units.
struct KernelSpec {
  BaseKernel base = BaseKernel::epanechnikov;
  std::vector<double> bandwidths;

  std::size_t dims() const noexcept { return bandwidths.size(); }
  /// Throws ConfigError unless every bandwidth lies in (0, 1/2].
  void validate() const;
};

struct KernelConstants {
  double mu2 = 0.0;        ///< integral of t^2 K(t)
  double roughness = 0.0;  ///< integral of K(t)^2
  double kappa = 0.0;      ///< integral over [0,1] of mu_1(-t) / mu_0(-t)
};

/// K0(t); zero outside [-1, 1].
double base_kernel_eval(BaseKernel kernel, double t);

/// Distribution function of K0, integral from -1 to t.
double base_kernel_cdf(BaseKernel kernel, double t);

/// Partial first moment, integral from c to 1 of u K0(u).
double base_kernel_partial_moment1(BaseKernel kernel, double c);

/// Boundary-corrected kernel K_h(u, v) = K0_h(u - v) / integral_0^1 K0_h(w - v) dw for u, v in [0, 1].
/// Throws ConfigError if h is outside (0, 1/2].
double boundary_kernel_eval(BaseKernel kernel, double u, double v, double h);

void check_bandwidth(double h);

/// Kernel weights of one sample on a one-dimensional grid, stored over the support window only.
struct KernelRow {
  std::size_t first = 0;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  /// One past the last grid index of the window.
  std::size_t end() const noexcept { return first + values.size(); }
  /// Weight at grid index k (zero outside the window).
  double at(std::size_t k) const noexcept {
    return (k >= first && k < end()) ? values[k - first] : 0.0;
  }
};

/// Boundary-corrected kernel row K_h(x_k, v) over equispaced grid points on [0, 1], rescaled so that the
/// trapezoid quadrature of the row equals one. The window covers all grid points with |x_k - v| <= h.
KernelRow discrete_kernel_row(BaseKernel kernel, std::span<const double> grid_points, double v, double h);

KernelConstants kernel_constants(BaseKernel kernel);

}  // namespace sbgam
