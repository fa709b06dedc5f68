#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "kifmm/laplace.hpp"
#include "kifmm/linalg.hpp"
#include "kifmm/octree.hpp"

namespace kifmm {

enum class SurfaceKind { UpwardEquivalent, UpwardCheck, DownwardEquivalent, DownwardCheck };

/// Number of points on the boundary of a P x P x P grid, 6 (P - 1)^2 + 2.
constexpr std::size_t surface_point_count(int order) {
  return order < 2 ? 0 : 6 * static_cast<std::size_t>(order - 1) * static_cast<std::size_t>(order - 1) + 2;
}

/// Grid indices (i, j, k) of the boundary points, lexicographic with i slowest.
/// This order is the coefficient order of every expansion.
std::vector<std::array<int, 3>> surface_indices(int order);

/// Boundary points of a cube of side scale * side, `order` points per axis.
struct SurfaceGrid {
  int order = 0;
  SurfaceKind kind = SurfaceKind::UpwardEquivalent;
  Point3 center{};
  double side = 0;  // side of the discretized cube (already scaled)
  PointSet<double> points;
};

SurfaceGrid surface(int order, const Point3& center, double side, double scale,
                    SurfaceKind kind = SurfaceKind::UpwardEquivalent);

/// Filtered SVD inverse of a check-to-equivalent matrix:
/// x = V diag(s / (s^2 + alpha)) U^T phi, singular values below cutoff * s_max dropped.
class RegularizedInverse {
 public:
  RegularizedInverse() = default;
  RegularizedInverse(const Matrix<double>& k, double alpha, double cutoff);

  Eigen::Index rank() const { return filtered_.size(); }
  Eigen::Index rows() const { return right_.rows(); }
  Eigen::Index cols() const { return left_.rows(); }
  double alpha() const { return alpha_; }

  const Matrix<double>& left() const { return left_; }
  const Matrix<double>& right() const { return right_; }
  const linalg::Vector<double>& filtered() const { return filtered_; }

  Matrix<double> apply(const Matrix<double>& phi) const;
  Matrix<double> matrix() const;

 private:
  Matrix<double> left_;
  Matrix<double> right_;
  linalg::Vector<double> filtered_;
  double alpha_ = 0;
};

/// Throws Parameter for alpha < 0 or cutoff outside [0, 1), Numerical on SVD failure.
RegularizedInverse tikhonov_pinv(const Matrix<double>& k, double alpha, double cutoff);

struct ExpansionConfig {
  int equivalent_order = 6;
  int check_order = 6;
  double inner_scale = 1.05;
  double outer_scale = 1.95;
  double alpha = 0.0;
  double cutoff = -1.0;  // negative: 10 * machine epsilon of the evaluation precision
  int p2m_block = 4;     // sibling sets per P2M product
  int m2m_block = 2;     // sibling sets per M2M / L2L product
};

/// Precomputed non-M2L translation operators. All matrices are built in double
/// precision at a reference level and cast to Real.
///
/// Coefficient buffers hold one level: an n_coeff x (n_boxes * n_rhs) column-major
/// matrix with column box * n_rhs + rhs. Point data (charges, potentials) is
/// rhs-major: value of point i for rhs r at r * n_points + i, in tree order.
template <class Real>
class ExpansionOperators {
 public:
  ExpansionOperators(const ExpansionConfig& config, const Domain& domain, int reference_level = 2);

  const ExpansionConfig& config() const { return config_; }
  std::size_t n_equiv() const { return n_equiv_; }
  std::size_t n_check() const { return n_check_; }
  int reference_level() const { return reference_level_; }
  double cutoff() const { return cutoff_; }

  /// Cached inverses at the reference level (double precision).
  const RegularizedInverse& upward_inverse() const { return uc2ue_; }
  const RegularizedInverse& downward_inverse() const { return dc2de_; }

  /// [M_0 ... M_7]: child c equivalent densities -> parent equivalent densities.
  const Matrix<Real>& m2m_matrix() const { return m2m_; }
  /// [L_0; ...; L_7]: parent local densities -> child c local densities.
  const Matrix<Real>& l2l_matrix() const { return l2l_; }

  /// equiv (+)= inverse_l * check for `cols` columns at tree level `level`.
  void upward_solve(int level, const Real* check, Real* equiv, std::size_t cols, bool accumulate) const;
  void downward_solve(int level, const Real* check, Real* equiv, std::size_t cols, bool accumulate) const;

  /// Surface of a box in the tree (scale fixed by kind).
  SurfaceGrid box_surface(const Octree& tree, const MortonKey& key, SurfaceKind kind) const;

  /// Leaf multipoles from sorted source points and charges. multipoles: leaf level buffer.
  void p2m(const Octree& sources, PointsView<Real> points, const Real* charges, int n_rhs, Real* multipoles) const;
  /// Parent level (level - 1) multipoles += M2M of level `level` multipoles.
  void m2m(const Octree& sources, int level, int n_rhs, const Real* children, Real* parents) const;
  /// Level `level` locals += L2L of level (level - 1) locals.
  void l2l(const Octree& targets, int level, int n_rhs, const Real* parents, Real* children) const;
  /// Potentials at sorted target points += leaf local expansions.
  void l2p(const Octree& targets, PointsView<Real> points, const Real* locals, int n_rhs, Real* potentials) const;

 private:
  void solve(const Matrix<Real>& right, const Matrix<Real>& left_t, double scale, const Real* check, Real* equiv,
             std::size_t cols, bool accumulate) const;

  ExpansionConfig config_;
  Domain domain_;
  int reference_level_;
  std::size_t n_equiv_, n_check_;
  double cutoff_;
  RegularizedInverse uc2ue_, dc2de_;
  Matrix<Real> uc2ue_right_, uc2ue_left_t_;  // V diag(f), U^T
  Matrix<Real> dc2de_right_, dc2de_left_t_;
  Matrix<Real> m2m_, l2l_;
};

/// Near-field potentials: each sorted target leaf sums over source leaves that
/// are itself or adjacent. Parallel over target leaves. Returns the number of
/// source-target point pairs visited.
template <class Real>
std::size_t p2p(const Octree& sources, PointsView<Real> source_points, const Real* charges, const Octree& targets,
                PointsView<Real> target_points, int n_rhs, Real* potentials);

}  // namespace kifmm
