#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sbgam/errors.hpp"
#include "sbgam/family.hpp"
#include "sbgam/grid.hpp"

namespace sbgam::detail {

constexpr double kDegenerateFloor = 1e-12;

/// sup over the product grid of |a + sum_j f_j(x_j)|.
inline double additive_sup(double a, const std::vector<std::vector<double>>& curves) {
  double hi = a;
  double lo = a;
  for (const auto& f : curves) {
    const auto [mn, mx] = std::minmax_element(f.begin(), f.end());
    hi += *mx;
    lo += *mn;
  }
  return std::max(std::abs(hi), std::abs(lo));
}

inline double curve_sup(std::span<const double> f) {
  double s = 0.0;
  for (double v : f) s = std::max(s, std::abs(v));
  return s;
}

inline double weighted_integral(const Grid& grid, std::span<const double> f, std::span<const double> g) {
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += grid.weight(k) * f[k] * g[k];
  return s;
}

inline void check_responses(const Dataset& data, const Family& fam) {
  for (std::size_t i = 0; i < data.samples(); ++i) {
    const double y = data.y(static_cast<Eigen::Index>(i));
    if (!fam.response_in_range(y)) {
      throw InputError("response " + std::to_string(y) + " at row " + std::to_string(i + 1) +
                       " is outside the range of family " + std::string(fam.name()));
    }
  }
}

}  // namespace sbgam::detail
