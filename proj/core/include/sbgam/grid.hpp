#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sbgam/kernels.hpp"

namespace sbgam {

/// Equispaced points on [0, 1] with trapezoid weights (1/2, 1, ..., 1, 1/2) * step. The same axis is used
/// for every covariate dimension.
class Grid {
 public:
  explicit Grid(std::size_t points_per_dim = 41);

  std::size_t size() const noexcept { return points_.size(); }
  double step() const noexcept { return step_; }
  std::span<const double> points() const noexcept { return points_; }
  std::span<const double> weights() const noexcept { return weights_; }
  double point(std::size_t k) const noexcept { return points_[k]; }
  double weight(std::size_t k) const noexcept { return weights_[k]; }

 private:
  double step_;
  std::vector<double> points_;
  std::vector<double> weights_;
};

/// Trapezoid quadrature of values sampled on the grid axis. Throws InternalError on length mismatch.
double trapezoid_integrate(const Grid& grid, std::span<const double> values);

/// Affine map between an original covariate range [min, max] and [0, 1].
struct AffineMap {
  double min = 0.0;
  double max = 1.0;

  double to_unit(double x) const noexcept { return (x - min) / (max - min); }
  double to_original(double u) const noexcept { return min + u * (max - min); }
  /// Scale factor d(original)/d(unit).
  double scale() const noexcept { return max - min; }
};

/// Responses and covariates rescaled to the unit cube, with the recorded transform.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;  ///< n x d, entries in [0, 1]
  std::vector<AffineMap> transform;
  std::vector<std::string> names;  ///< covariate names; may be empty

  std::size_t samples() const noexcept { return static_cast<std::size_t>(y.size()); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(x.cols()); }
  /// Throws InputError if shapes disagree, n < 2, or a covariate lies outside [0, 1].
  void validate() const;
  std::string column_name(std::size_t j) const;
};

/// Maps every covariate column affinely so that its min becomes 0 and its max 1.
/// Throws InputError naming the column if it is constant.
Dataset rescale_covariates(const Eigen::MatrixXd& raw, Eigen::VectorXd y, std::vector<std::string> names = {});

/// Same, with known covariate bounds instead of the sample range.
Dataset rescale_covariates(const Eigen::MatrixXd& raw, Eigen::VectorXd y, std::span<const AffineMap> bounds,
                           std::vector<std::string> names = {});

/// Maps rescaled covariates back to the original scale.
Eigen::MatrixXd original_covariates(const Dataset& data);

/// Total, one-dimensional and two-dimensional marginals of a function on the product grid.
/// Surfaces are stored for j < l and indexed (k_j, k_l).
struct MarginalSet {
  double total = 0.0;
  std::vector<std::vector<double>> curves;
  std::vector<Eigen::MatrixXd> surfaces;

  std::size_t dims() const noexcept { return curves.size(); }
  static std::size_t pair_index(std::size_t j, std::size_t l, std::size_t dims) noexcept;
  /// Surface over (x_j, x_l); for j > l the stored (l, j) surface is transposed.
  Eigen::MatrixXd surface(std::size_t j, std::size_t l) const;
  const Eigen::MatrixXd& stored_surface(std::size_t j, std::size_t l) const;
};

/// Accumulates trapezoid-weighted cell values into a MarginalSet.
class MarginalAccumulator {
 public:
  MarginalAccumulator(const Grid& grid, std::size_t dims, bool with_surfaces);

  /// Adds the integrand value at one cell of the product grid.
  void add(std::span<const std::size_t> cell, double value);
  void merge(const MarginalAccumulator& other);
  const MarginalSet& result() const noexcept { return set_; }
  MarginalSet take() && { return std::move(set_); }

 private:
  std::span<const double> weights_;
  std::vector<double> inverse_weights_;
  bool with_surfaces_;
  MarginalSet set_;
};

using CellFunction = std::function<double(std::span<const std::size_t>)>;

/// Full-tensor marginalization: keeps nothing (total), one dimension, or two dimensions.
double marginalize_total(const Grid& grid, std::size_t dims, const CellFunction& f);
std::vector<double> marginalize_curve(const Grid& grid, std::size_t dims, const CellFunction& f, std::size_t keep);
Eigen::MatrixXd marginalize_surface(const Grid& grid, std::size_t dims, const CellFunction& f, std::size_t keep_a,
                                    std::size_t keep_b);
/// All marginals of f in one pass over the full product grid.
MarginalSet marginalize_all(const Grid& grid, std::size_t dims, const CellFunction& f, bool with_surfaces = true);

/// Kernel rows per (dimension, sample), computed once and shared by every iteration.
class KernelRowCache {
 public:
  KernelRowCache(const Dataset& data, const KernelSpec& kernel, const Grid& grid);

  std::size_t dims() const noexcept { return rows_.size(); }
  std::size_t samples() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }
  const KernelRow& row(std::size_t dim, std::size_t sample) const { return rows_[dim][sample]; }

 private:
  std::vector<std::vector<KernelRow>> rows_;
};

/// Calls visit(cell, kernel_product) for every cell of the product grid inside the support window of one
/// sample. kernel_product is the product of the sample's kernel rows at the cell.
template <class Visit>
void for_each_window_cell(const KernelRowCache& rows, std::size_t sample, std::vector<std::size_t>& cell,
                          Visit&& visit) {
  const std::size_t d = rows.dims();
  cell.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (rows.row(j, sample).size() == 0) return;
    cell[j] = rows.row(j, sample).first;
  }
  while (true) {
    double kernel = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      const KernelRow& r = rows.row(j, sample);
      kernel *= r.values[cell[j] - r.first];
    }
    if (kernel != 0.0) visit(std::span<const std::size_t>(cell), kernel);
    std::size_t j = d;
    while (j > 0) {
      --j;
      const KernelRow& r = rows.row(j, sample);
      if (++cell[j] < r.end()) break;
      cell[j] = r.first;
      if (j == 0) return;
    }
    if (d == 0) return;
  }
}

/// Streams over samples and their support windows, accumulating marginals of
/// sum_i f(i, cell, kernel_product). Full d-dimensional tensors are never formed.
template <class F>
MarginalSet stream_marginals(const Grid& grid, const KernelRowCache& rows, F&& f, bool with_surfaces) {
  MarginalAccumulator acc(grid, rows.dims(), with_surfaces);
  std::vector<std::size_t> cell;
  for (std::size_t i = 0; i < rows.samples(); ++i) {
    for_each_window_cell(rows, i, cell, [&](std::span<const std::size_t> c, double kernel) {
      acc.add(c, f(i, c, kernel));
    });
  }
  return std::move(acc).take();
}

/// Data, kernel, grid and the cached kernel rows shared by a fit.
class SmoothingContext {
 public:
  SmoothingContext(Dataset data, KernelSpec kernel, Grid grid);

  const Dataset& data() const noexcept { return data_; }
  const KernelSpec& kernel() const noexcept { return kernel_; }
  const Grid& grid() const noexcept { return grid_; }
  const KernelRowCache& rows() const noexcept { return rows_; }
  std::size_t dims() const noexcept { return data_.dims(); }
  std::size_t samples() const noexcept { return data_.samples(); }

 private:
  Dataset data_;
  KernelSpec kernel_;
  Grid grid_;
  KernelRowCache rows_;
};

}  // namespace sbgam
