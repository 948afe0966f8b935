#include "sbgam/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "sbgam/errors.hpp"

namespace sbgam {

std::string_view to_string(BaseKernel kernel) {
  switch (kernel) {
    case BaseKernel::epanechnikov:
      return "epanechnikov";
    case BaseKernel::quartic:
      return "quartic";
    case BaseKernel::triangular:
      return "triangular";
  }
  return "unknown";
}

BaseKernel parse_kernel(std::string_view name) {
  if (name == "epanechnikov") return BaseKernel::epanechnikov;
  if (name == "quartic") return BaseKernel::quartic;
  if (name == "triangular") return BaseKernel::triangular;
  throw ConfigError("unknown kernel '" + std::string(name) + "'");
}

void check_bandwidth(double h) {
  if (!(h > 0.0 && h <= 0.5)) {
    throw ConfigError("bandwidth " + std::to_string(h) + " outside (0, 1/2]");
  }
}

void KernelSpec::validate() const {
  if (bandwidths.empty()) throw ConfigError("kernel spec has no bandwidths");
  for (double h : bandwidths) check_bandwidth(h);
}

double base_kernel_eval(BaseKernel kernel, double t) {
  const double a = std::abs(t);
  if (a > 1.0) return 0.0;
  switch (kernel) {
    case BaseKernel::epanechnikov:
      return 0.75 * (1.0 - t * t);
    case BaseKernel::quartic: {
      const double s = 1.0 - t * t;
      return 0.9375 * s * s;
    }
    case BaseKernel::triangular:
      return 1.0 - a;
  }
  return 0.0;
}

double base_kernel_cdf(BaseKernel kernel, double t) {
  if (t <= -1.0) return 0.0;
  if (t >= 1.0) return 1.0;
  switch (kernel) {
    case BaseKernel::epanechnikov:
      return 0.5 + 0.75 * (t - t * t * t / 3.0);
    case BaseKernel::quartic: {
      const double t3 = t * t * t;
      return 0.5 + 0.9375 * (t - 2.0 * t3 / 3.0 + t3 * t * t / 5.0);
    }
    case BaseKernel::triangular:
      return t < 0.0 ? 0.5 * (1.0 + t) * (1.0 + t) : 1.0 - 0.5 * (1.0 - t) * (1.0 - t);
  }
  return 0.0;
}

double base_kernel_partial_moment1(BaseKernel kernel, double c) {
  // The odd moment over [-|c|, |c|] vanishes, so only |c| matters.
  const double a = std::min(std::abs(c), 1.0);
  switch (kernel) {
    case BaseKernel::epanechnikov: {
      const double s = 1.0 - a * a;
      return 0.1875 * s * s;
    }
    case BaseKernel::quartic: {
      const double s = 1.0 - a * a;
      return 0.15625 * s * s * s;
    }
    case BaseKernel::triangular:
      return 1.0 / 6.0 - 0.5 * a * a + a * a * a / 3.0;
  }
  return 0.0;
}

double boundary_kernel_eval(BaseKernel kernel, double u, double v, double h) {
  check_bandwidth(h);
  if (u < 0.0 || u > 1.0 || v < 0.0 || v > 1.0) return 0.0;
  const double numerator = base_kernel_eval(kernel, (u - v) / h) / h;
  if (numerator == 0.0) return 0.0;
  if (v >= h && v <= 1.0 - h) return numerator;  // full support inside [0, 1]
  const double mass = base_kernel_cdf(kernel, (1.0 - v) / h) - base_kernel_cdf(kernel, -v / h);
  return numerator / mass;
}

KernelRow discrete_kernel_row(BaseKernel kernel, std::span<const double> grid_points, double v, double h) {
  check_bandwidth(h);
  const std::size_t count = grid_points.size();
  if (count < 2) throw ConfigError("grid needs at least two points");
  const double step = grid_points[1] - grid_points[0];
  constexpr double slack = 1e-9;

  const double lo = std::ceil((v - h) / step - slack);
  const double hi = std::floor((v + h) / step + slack);
  const auto first = static_cast<std::size_t>(std::max(lo, 0.0));
  const auto last = static_cast<std::size_t>(std::clamp(hi, 0.0, static_cast<double>(count - 1)));

  KernelRow row;
  row.first = first;
  double quadrature = 0.0;
  for (std::size_t k = first; k <= last && k < count; ++k) {
    const double value = boundary_kernel_eval(kernel, grid_points[k], v, h);
    const double weight = (k == 0 || k == count - 1) ? 0.5 * step : step;
    quadrature += weight * value;
    row.values.push_back(value);
  }
  if (!(quadrature > 0.0)) {
    throw ConfigError("kernel row at v=" + std::to_string(v) + " is empty; bandwidth " + std::to_string(h) +
                      " is too small for the grid spacing");
  }
  for (double& value : row.values) value /= quadrature;
  return row;
}

KernelConstants kernel_constants(BaseKernel kernel) {
  KernelConstants c;
  switch (kernel) {
    case BaseKernel::epanechnikov:
      c.mu2 = 0.2;
      c.roughness = 0.6;
      break;
    case BaseKernel::quartic:
      c.mu2 = 1.0 / 7.0;
      c.roughness = 5.0 / 7.0;
      break;
    case BaseKernel::triangular:
      c.mu2 = 1.0 / 6.0;
      c.roughness = 2.0 / 3.0;
      break;
  }
  auto ratio = [kernel](double t) {
    // mu_0(-t) = 1 - F(-t) = F(t) by symmetry.
    return base_kernel_partial_moment1(kernel, -t) / base_kernel_cdf(kernel, t);
  };
  double error = 0.0;
  c.kappa = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(ratio, 0.0, 1.0, 15, 1e-13, &error);
  return c;
}

}  // namespace sbgam
