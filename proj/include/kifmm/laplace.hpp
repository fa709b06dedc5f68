#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "kifmm/morton.hpp"

namespace kifmm {

template <class Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

/// Structure-of-arrays coordinates.
template <class Real>
struct PointsView {
  const Real* x = nullptr;
  const Real* y = nullptr;
  const Real* z = nullptr;
  std::size_t size = 0;

  PointsView subset(std::size_t begin, std::size_t end) const { return {x + begin, y + begin, z + begin, end - begin}; }
};

template <class Real>
struct PointSet {
  std::vector<Real> x, y, z;

  PointSet() = default;
  explicit PointSet(std::size_t n) : x(n), y(n), z(n) {}
  explicit PointSet(std::span<const Point3> pts);

  std::size_t size() const { return x.size(); }
  PointsView<Real> view() const { return {x.data(), y.data(), z.data(), x.size()}; }
};

namespace laplace {

inline constexpr double kInvFourPi = 0.25 * std::numbers::inv_pi;

/// 1 / (4 pi |x - y|), zero for coincident points.
inline double evaluate(const Point3& x, const Point3& y) {
  const double dx = x[0] - y[0], dy = x[1] - y[1], dz = x[2] - y[2];
  const double r2 = dx * dx + dy * dy + dz * dz;
  return r2 > 0.0 ? kInvFourPi / std::sqrt(r2) : 0.0;
}

/// Two-dimensional branch, log(1 / |x - y|) / (2 pi); not used by the 3D pipeline.
double evaluate_2d(const std::array<double, 2>& x, const std::array<double, 2>& y);

/// Dense n_targets x n_sources kernel matrix.
template <class Real>
Matrix<Real> assemble_matrix(PointsView<Real> sources, PointsView<Real> targets);

/// Adds sum_j K(x_i, y_j) q_j to potentials for every right-hand side.
/// Charges of rhs r live at charges[r * charge_stride + j], potentials at
/// potentials[r * potential_stride + i]. Single-threaded; each rhs sees the same
/// operation sequence whatever n_rhs is.
template <class Real>
void accumulate(PointsView<Real> sources, const Real* charges, std::size_t charge_stride, PointsView<Real> targets,
                Real* potentials, std::size_t potential_stride, int n_rhs);

/// Direct evaluation of all targets over all sources, parallel over targets.
/// charges: n_sources * n_rhs, rhs-major blocks. Returns n_targets * n_rhs.
template <class Real>
std::vector<Real> direct_potentials(PointsView<Real> sources, std::span<const Real> charges, PointsView<Real> targets,
                                    int n_rhs = 1);

/// 2^level_delta: the kernel on boxes shrunk by 2^-level_delta is the base kernel times this.
inline double homogeneity_scale(int level_delta) { return std::ldexp(1.0, level_delta); }

}  // namespace laplace
}  // namespace kifmm
