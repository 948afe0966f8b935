#include "sbgam/grid.hpp"

#include <cmath>
#include <utility>

#include "sbgam/errors.hpp"

namespace sbgam {

Grid::Grid(std::size_t points_per_dim) {
  if (points_per_dim < 5) throw ConfigError("grid needs at least 5 points per dimension");
  step_ = 1.0 / static_cast<double>(points_per_dim - 1);
  points_.resize(points_per_dim);
  weights_.assign(points_per_dim, step_);
  for (std::size_t k = 0; k < points_per_dim; ++k) points_[k] = static_cast<double>(k) * step_;
  points_.back() = 1.0;
  weights_.front() = weights_.back() = 0.5 * step_;
}

double trapezoid_integrate(const Grid& grid, std::span<const double> values) {
  if (values.size() != grid.size()) {
    throw InternalError("trapezoid_integrate: length " + std::to_string(values.size()) + " does not match grid " +
                        std::to_string(grid.size()));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) sum += grid.weight(k) * values[k];
  return sum;
}

void Dataset::validate() const {
  if (x.rows() != y.size()) throw InputError("covariate rows do not match the response length");
  if (samples() < 2) throw InputError("need at least two samples");
  if (dims() == 0) throw InputError("need at least one covariate");
  if (!transform.empty() && transform.size() != dims()) throw InputError("transform size mismatch");
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double v = x(i, j);
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InputError("covariate " + column_name(static_cast<std::size_t>(j)) + " outside [0, 1] at row " +
                         std::to_string(i + 1));
      }
    }
  }
}

std::string Dataset::column_name(std::size_t j) const {
  if (j < names.size() && !names[j].empty()) return "'" + names[j] + "'";
  return "x" + std::to_string(j + 1);
}

namespace {

Dataset apply_maps(const Eigen::MatrixXd& raw, Eigen::VectorXd y, std::vector<AffineMap> maps,
                   std::vector<std::string> names) {
  Dataset data;
  data.x.resize(raw.rows(), raw.cols());
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const AffineMap& m = maps[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < raw.rows(); ++i) {
      // Exact endpoints so that min -> 0 and max -> 1 without rounding.
      const double v = raw(i, j);
      data.x(i, j) = v == m.min ? 0.0 : (v == m.max ? 1.0 : m.to_unit(v));
    }
  }
  data.y = std::move(y);
  data.transform = std::move(maps);
  data.names = std::move(names);
  data.validate();
  return data;
}

}  // namespace

Dataset rescale_covariates(const Eigen::MatrixXd& raw, Eigen::VectorXd y, std::vector<std::string> names) {
  std::vector<AffineMap> maps;
  for (Eigen::Index j = 0; j < raw.cols(); ++j) {
    const double lo = raw.col(j).minCoeff();
    const double hi = raw.col(j).maxCoeff();
    if (!std::isfinite(lo) || !std::isfinite(hi)) {
      throw InputError("covariate column " + std::to_string(j + 1) + " has non-finite values");
    }
    if (!(hi > lo)) {
      const auto idx = static_cast<std::size_t>(j);
      const std::string label =
          idx < names.size() && !names[idx].empty() ? "'" + names[idx] + "'" : "x" + std::to_string(j + 1);
      throw InputError("covariate column " + label + " is constant");
    }
    maps.push_back({lo, hi});
  }
  return apply_maps(raw, std::move(y), std::move(maps), std::move(names));
}

Dataset rescale_covariates(const Eigen::MatrixXd& raw, Eigen::VectorXd y, std::span<const AffineMap> bounds,
                           std::vector<std::string> names) {
  if (bounds.size() != static_cast<std::size_t>(raw.cols())) throw InputError("bounds do not match covariates");
  for (const AffineMap& m : bounds) {
    if (!(m.max > m.min)) throw InputError("empty covariate bounds");
  }
  return apply_maps(raw, std::move(y), std::vector<AffineMap>(bounds.begin(), bounds.end()), std::move(names));
}

Eigen::MatrixXd original_covariates(const Dataset& data) {
  Eigen::MatrixXd out(data.x.rows(), data.x.cols());
  for (Eigen::Index j = 0; j < data.x.cols(); ++j) {
    const AffineMap m = data.transform.empty() ? AffineMap{} : data.transform[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) out(i, j) = m.to_original(data.x(i, j));
  }
  return out;
}

std::size_t MarginalSet::pair_index(std::size_t j, std::size_t l, std::size_t dims) noexcept {
  // Lexicographic index of (j, l), j < l.
  return j * dims - j * (j + 1) / 2 + (l - j - 1);
}

const Eigen::MatrixXd& MarginalSet::stored_surface(std::size_t j, std::size_t l) const {
  if (j >= l || l >= dims()) throw InternalError("stored_surface expects j < l < dims");
  return surfaces[pair_index(j, l, dims())];
}

Eigen::MatrixXd MarginalSet::surface(std::size_t j, std::size_t l) const {
  if (j == l) throw InternalError("surface needs two distinct dimensions");
  return j < l ? stored_surface(j, l) : Eigen::MatrixXd(stored_surface(l, j).transpose());
}

MarginalAccumulator::MarginalAccumulator(const Grid& grid, std::size_t dims, bool with_surfaces)
    : weights_(grid.weights()), with_surfaces_(with_surfaces) {
  const auto g = grid.size();
  inverse_weights_.resize(g);
  for (std::size_t k = 0; k < g; ++k) inverse_weights_[k] = 1.0 / weights_[k];
  set_.curves.assign(dims, std::vector<double>(g, 0.0));
  if (with_surfaces && dims > 1) {
    set_.surfaces.assign(dims * (dims - 1) / 2,
                         Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g)));
  }
}

void MarginalAccumulator::add(std::span<const std::size_t> cell, double value) {
  const std::size_t d = cell.size();
  double full = value;
  for (std::size_t j = 0; j < d; ++j) full *= weights_[cell[j]];
  set_.total += full;
  for (std::size_t j = 0; j < d; ++j) set_.curves[j][cell[j]] += full * inverse_weights_[cell[j]];
  if (!with_surfaces_) return;
  std::size_t p = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double wj = full * inverse_weights_[cell[j]];
    for (std::size_t l = j + 1; l < d; ++l, ++p) {
      set_.surfaces[p](static_cast<Eigen::Index>(cell[j]), static_cast<Eigen::Index>(cell[l])) +=
          wj * inverse_weights_[cell[l]];
    }
  }
}

void MarginalAccumulator::merge(const MarginalAccumulator& other) {
  set_.total += other.set_.total;
  for (std::size_t j = 0; j < set_.curves.size(); ++j) {
    for (std::size_t k = 0; k < set_.curves[j].size(); ++k) set_.curves[j][k] += other.set_.curves[j][k];
  }
  for (std::size_t p = 0; p < set_.surfaces.size(); ++p) set_.surfaces[p] += other.set_.surfaces[p];
}

namespace {

template <class Visit>
void for_each_cell(std::size_t points, std::size_t dims, Visit&& visit) {
  std::vector<std::size_t> cell(dims, 0);
  while (true) {
    visit(std::span<const std::size_t>(cell));
    std::size_t j = dims;
    while (j > 0) {
      --j;
      if (++cell[j] < points) break;
      cell[j] = 0;
      if (j == 0) return;
    }
    if (dims == 0) return;
  }
}

}  // namespace

MarginalSet marginalize_all(const Grid& grid, std::size_t dims, const CellFunction& f, bool with_surfaces) {
  MarginalAccumulator acc(grid, dims, with_surfaces);
  for_each_cell(grid.size(), dims, [&](std::span<const std::size_t> cell) { acc.add(cell, f(cell)); });
  return std::move(acc).take();
}

double marginalize_total(const Grid& grid, std::size_t dims, const CellFunction& f) {
  return marginalize_all(grid, dims, f, false).total;
}

std::vector<double> marginalize_curve(const Grid& grid, std::size_t dims, const CellFunction& f, std::size_t keep) {
  if (keep >= dims) throw InternalError("marginalize_curve: dimension out of range");
  return marginalize_all(grid, dims, f, false).curves[keep];
}

Eigen::MatrixXd marginalize_surface(const Grid& grid, std::size_t dims, const CellFunction& f, std::size_t keep_a,
                                    std::size_t keep_b) {
  if (keep_a >= dims || keep_b >= dims || keep_a == keep_b) {
    throw InternalError("marginalize_surface: invalid dimension pair");
  }
  return marginalize_all(grid, dims, f, true).surface(keep_a, keep_b);
}

KernelRowCache::KernelRowCache(const Dataset& data, const KernelSpec& kernel, const Grid& grid) {
  if (kernel.dims() != data.dims()) {
    throw ConfigError("kernel has " + std::to_string(kernel.dims()) + " bandwidths for " +
                      std::to_string(data.dims()) + " covariates");
  }
  kernel.validate();
  rows_.resize(data.dims());
  for (std::size_t j = 0; j < data.dims(); ++j) {
    rows_[j].reserve(data.samples());
    for (std::size_t i = 0; i < data.samples(); ++i) {
      rows_[j].push_back(discrete_kernel_row(kernel.base, grid.points(),
                                             data.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)),
                                             kernel.bandwidths[j]));
    }
  }
}

SmoothingContext::SmoothingContext(Dataset data, KernelSpec kernel, Grid grid)
    : data_((data.validate(), std::move(data))),
      kernel_(std::move(kernel)),
      grid_(std::move(grid)),
      rows_(data_, kernel_, grid_) {}

}  // namespace sbgam
