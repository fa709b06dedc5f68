#include "kifmm/expansion.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "kifmm/error.hpp"

namespace kifmm {

std::vector<std::array<int, 3>> surface_indices(int order) {
  if (order < 2) fail(ErrorKind::Parameter, "surface order must be at least 2, got " + std::to_string(order));
  std::vector<std::array<int, 3>> idx;
  idx.reserve(surface_point_count(order));
  const int last = order - 1;
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < order; ++j)
      for (int k = 0; k < order; ++k) {
        const bool boundary = i == 0 || i == last || j == 0 || j == last || k == 0 || k == last;
        if (boundary) idx.push_back({i, j, k});
      }
  return idx;
}

SurfaceGrid surface(int order, const Point3& center, double side, double scale, SurfaceKind kind) {
  if (!(side > 0) || !(scale > 0)) fail(ErrorKind::Parameter, "surface side and scale must be positive");
  SurfaceGrid g;
  g.order = order;
  g.kind = kind;
  g.center = center;
  g.side = scale * side;
  const auto idx = surface_indices(order);
  g.points = PointSet<double>(idx.size());
  const double step = g.side / (order - 1);
  const double half = 0.5 * g.side;
  for (std::size_t n = 0; n < idx.size(); ++n) {
    g.points.x[n] = center[0] - half + idx[n][0] * step;
    g.points.y[n] = center[1] - half + idx[n][1] * step;
    g.points.z[n] = center[2] - half + idx[n][2] * step;
  }
  return g;
}

RegularizedInverse::RegularizedInverse(const Matrix<double>& k, double alpha, double cutoff) : alpha_(alpha) {
  if (!(alpha >= 0)) fail(ErrorKind::Parameter, "regularization alpha must be non-negative");
  if (!(cutoff >= 0 && cutoff < 1)) fail(ErrorKind::Parameter, "singular value cutoff must lie in [0, 1)");
  if (k.size() == 0) fail(ErrorKind::Shape, "cannot invert an empty matrix");
  const auto d = linalg::svd<double>(k);
  const double smax = d.s(0);
  Eigen::Index r = 0;
  while (r < d.s.size() && d.s(r) > 0 && d.s(r) >= cutoff * smax) ++r;
  left_ = d.u.leftCols(r);
  right_ = d.v.leftCols(r);
  filtered_ = d.s.head(r).array() / (d.s.head(r).array().square() + alpha);
}

Matrix<double> RegularizedInverse::apply(const Matrix<double>& phi) const {
  if (phi.rows() != left_.rows()) fail(ErrorKind::Shape, "check potential size does not match inverse");
  return right_ * (filtered_.asDiagonal() * (left_.transpose() * phi));
}

Matrix<double> RegularizedInverse::matrix() const { return right_ * filtered_.asDiagonal() * left_.transpose(); }

RegularizedInverse tikhonov_pinv(const Matrix<double>& k, double alpha, double cutoff) {
  return RegularizedInverse(k, alpha, cutoff);
}

namespace {

Matrix<double> kernel(const SurfaceGrid& src, const SurfaceGrid& tgt) {
  return laplace::assemble_matrix<double>(src.points.view(), tgt.points.view());
}

template <class Real>
PointSet<Real> cast_points(const PointSet<double>& p) {
  PointSet<Real> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    out.x[i] = static_cast<Real>(p.x[i]);
    out.y[i] = static_cast<Real>(p.y[i]);
    out.z[i] = static_cast<Real>(p.z[i]);
  }
  return out;
}

Point3 child_center(const Point3& parent, double child_side, int c) {
  const auto off = child_offset(c);
  Point3 p;
  for (int a = 0; a < 3; ++a) p[a] = parent[a] + (off[a] - 0.5) * child_side;
  return p;
}

}  // namespace

template <class Real>
ExpansionOperators<Real>::ExpansionOperators(const ExpansionConfig& config, const Domain& domain,
                                             int reference_level)
    : config_(config), domain_(domain), reference_level_(reference_level) {
  if (config.equivalent_order < 2 || config.check_order < 2) {
    fail(ErrorKind::Parameter, "expansion orders must be at least 2");
  }
  if (!(config.inner_scale > 1) || !(config.outer_scale > config.inner_scale)) {
    fail(ErrorKind::Parameter, "surface scales must satisfy 1 < inner < outer");
  }
  if (config.p2m_block < 1 || config.m2m_block < 1) fail(ErrorKind::Parameter, "block sizes must be positive");
  n_equiv_ = surface_point_count(config.equivalent_order);
  n_check_ = surface_point_count(config.check_order);
  cutoff_ = config.cutoff < 0 ? 10.0 * std::numeric_limits<Real>::epsilon() : config.cutoff;

  const double h = domain.side / static_cast<double>(1u << reference_level);
  const Point3 o{0, 0, 0};
  const int pe = config.equivalent_order, pc = config.check_order;
  const double in = config.inner_scale, out = config.outer_scale;

  const auto ue = surface(pe, o, h, in, SurfaceKind::UpwardEquivalent);
  const auto uc = surface(pc, o, h, out, SurfaceKind::UpwardCheck);
  const auto de = surface(pe, o, h, out, SurfaceKind::DownwardEquivalent);
  const auto dc = surface(pc, o, h, in, SurfaceKind::DownwardCheck);
  uc2ue_ = tikhonov_pinv(kernel(ue, uc), config.alpha, cutoff_);
  dc2de_ = tikhonov_pinv(kernel(de, dc), config.alpha, cutoff_);

  const Matrix<double> uc2ue_right = uc2ue_.right() * uc2ue_.filtered().asDiagonal();
  const Matrix<double> dc2de_right = dc2de_.right() * dc2de_.filtered().asDiagonal();
  uc2ue_right_ = uc2ue_right.cast<Real>();
  uc2ue_left_t_ = uc2ue_.left().transpose().cast<Real>();
  dc2de_right_ = dc2de_right.cast<Real>();
  dc2de_left_t_ = dc2de_.left().transpose().cast<Real>();

  const auto ne = static_cast<Eigen::Index>(n_equiv_);
  Matrix<double> m2m(ne, 8 * ne), l2l(8 * ne, ne);
  const Matrix<double> uinv = uc2ue_.matrix();
  const Matrix<double> dinv_child = 0.5 * dc2de_.matrix();
  for (int c = 0; c < 8; ++c) {
    const Point3 cc = child_center(o, 0.5 * h, c);
    const auto child_ue = surface(pe, cc, 0.5 * h, in, SurfaceKind::UpwardEquivalent);
    m2m.middleCols(c * ne, ne) = uinv * kernel(child_ue, uc);
    const auto child_dc = surface(pc, cc, 0.5 * h, in, SurfaceKind::DownwardCheck);
    l2l.middleRows(c * ne, ne) = dinv_child * kernel(de, child_dc);
  }
  m2m_ = m2m.cast<Real>();
  l2l_ = l2l.cast<Real>();
}

template <class Real>
void ExpansionOperators<Real>::solve(const Matrix<Real>& right, const Matrix<Real>& left_t, double scale,
                                     const Real* check, Real* equiv, std::size_t cols, bool accumulate) const {
  if (cols == 0) return;
  const auto n = static_cast<Eigen::Index>(cols);
  Eigen::Map<const Matrix<Real>> c(check, left_t.cols(), n);
  Eigen::Map<Matrix<Real>> e(equiv, right.rows(), n);
  // Column blocks keep the intermediate cache resident for wide multi-rhs levels.
  constexpr Eigen::Index kBlock = 1024;
  Matrix<Real> tmp;
  for (Eigen::Index j = 0; j < n; j += kBlock) {
    const Eigen::Index w = std::min(kBlock, n - j);
    tmp.noalias() = left_t * c.middleCols(j, w);
    if (accumulate) {
      e.middleCols(j, w).noalias() += static_cast<Real>(scale) * (right * tmp);
    } else {
      e.middleCols(j, w).noalias() = static_cast<Real>(scale) * (right * tmp);
    }
  }
}

template <class Real>
void ExpansionOperators<Real>::upward_solve(int level, const Real* check, Real* equiv, std::size_t cols,
                                            bool accumulate) const {
  solve(uc2ue_right_, uc2ue_left_t_, laplace::homogeneity_scale(reference_level_ - level), check, equiv, cols,
        accumulate);
}

template <class Real>
void ExpansionOperators<Real>::downward_solve(int level, const Real* check, Real* equiv, std::size_t cols,
                                              bool accumulate) const {
  solve(dc2de_right_, dc2de_left_t_, laplace::homogeneity_scale(reference_level_ - level), check, equiv, cols,
        accumulate);
}

template <class Real>
SurfaceGrid ExpansionOperators<Real>::box_surface(const Octree& tree, const MortonKey& key, SurfaceKind kind) const {
  const bool equivalent = kind == SurfaceKind::UpwardEquivalent || kind == SurfaceKind::DownwardEquivalent;
  const bool inner = kind == SurfaceKind::UpwardEquivalent || kind == SurfaceKind::DownwardCheck;
  return surface(equivalent ? config_.equivalent_order : config_.check_order, tree.box_center(key),
                 tree.box_side(key.level()), inner ? config_.inner_scale : config_.outer_scale, kind);
}

template <class Real>
void ExpansionOperators<Real>::p2m(const Octree& sources, PointsView<Real> points, const Real* charges, int n_rhs,
                                   Real* multipoles) const {
  const auto leaves = sources.leaves();
  const std::size_t block = static_cast<std::size_t>(config_.p2m_block) * 8;
  const auto n_blocks = static_cast<std::ptrdiff_t>((leaves.size() + block - 1) / block);
  const auto nr = static_cast<std::size_t>(n_rhs);
  const int level = sources.depth();
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < n_blocks; ++b) {
    const std::size_t l0 = static_cast<std::size_t>(b) * block;
    const std::size_t l1 = std::min(leaves.size(), l0 + block);
    std::vector<Real> check(n_check_ * (l1 - l0) * nr, Real(0));
    for (std::size_t l = l0; l < l1; ++l) {
      const auto surf = cast_points<Real>(box_surface(sources, leaves[l], SurfaceKind::UpwardCheck).points);
      const auto [p0, p1] = sources.leaf_points(l);
      laplace::accumulate(points.subset(p0, p1), charges + p0, points.size, surf.view(),
                          check.data() + (l - l0) * nr * n_check_, n_check_, n_rhs);
    }
    upward_solve(level, check.data(), multipoles + l0 * nr * n_equiv_, (l1 - l0) * nr, false);
  }
}

template <class Real>
void ExpansionOperators<Real>::m2m(const Octree& sources, int level, int n_rhs, const Real* children,
                                   Real* parents) const {
  if (level < 1 || level > sources.depth()) fail(ErrorKind::InvalidLevel, "M2M child level out of range");
  const std::size_t n_parents = sources.n_keys(level - 1);
  const auto block = static_cast<std::size_t>(config_.m2m_block);
  const auto n_blocks = static_cast<std::ptrdiff_t>((n_parents + block - 1) / block);
  const auto nr = static_cast<std::size_t>(n_rhs);
  const auto ne = static_cast<Eigen::Index>(n_equiv_);
  const auto children_keys = sources.keys(level);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < n_blocks; ++b) {
    const std::size_t q0 = static_cast<std::size_t>(b) * block;
    const std::size_t q1 = std::min(n_parents, q0 + block);
    Matrix<Real> gathered = Matrix<Real>::Zero(8 * ne, static_cast<Eigen::Index>((q1 - q0) * nr));
    for (std::size_t q = q0; q < q1; ++q) {
      const auto [c0, c1] = sources.children_range(level - 1, q);
      for (std::size_t c = c0; c < c1; ++c) {
        const int ci = children_keys[c].child_index();
        Eigen::Map<const Matrix<Real>> src(children + c * nr * n_equiv_, ne, static_cast<Eigen::Index>(nr));
        gathered.block(ci * ne, static_cast<Eigen::Index>((q - q0) * nr), ne, static_cast<Eigen::Index>(nr)) = src;
      }
    }
    Eigen::Map<Matrix<Real>> out(parents + q0 * nr * n_equiv_, ne, static_cast<Eigen::Index>((q1 - q0) * nr));
    out.noalias() += m2m_ * gathered;
  }
}

template <class Real>
void ExpansionOperators<Real>::l2l(const Octree& targets, int level, int n_rhs, const Real* parents,
                                   Real* children) const {
  if (level < 1 || level > targets.depth()) fail(ErrorKind::InvalidLevel, "L2L child level out of range");
  const std::size_t n_parents = targets.n_keys(level - 1);
  const auto block = static_cast<std::size_t>(config_.m2m_block);
  const auto n_blocks = static_cast<std::ptrdiff_t>((n_parents + block - 1) / block);
  const auto nr = static_cast<std::size_t>(n_rhs);
  const auto ne = static_cast<Eigen::Index>(n_equiv_);
  const auto children_keys = targets.keys(level);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < n_blocks; ++b) {
    const std::size_t q0 = static_cast<std::size_t>(b) * block;
    const std::size_t q1 = std::min(n_parents, q0 + block);
    Eigen::Map<const Matrix<Real>> in(parents + q0 * nr * n_equiv_, ne, static_cast<Eigen::Index>((q1 - q0) * nr));
    const Matrix<Real> spread = l2l_ * in;
    for (std::size_t q = q0; q < q1; ++q) {
      const auto [c0, c1] = targets.children_range(level - 1, q);
      for (std::size_t c = c0; c < c1; ++c) {
        const int ci = children_keys[c].child_index();
        Eigen::Map<Matrix<Real>> dst(children + c * nr * n_equiv_, ne, static_cast<Eigen::Index>(nr));
        dst += spread.block(ci * ne, static_cast<Eigen::Index>((q - q0) * nr), ne, static_cast<Eigen::Index>(nr));
      }
    }
  }
}

template <class Real>
void ExpansionOperators<Real>::l2p(const Octree& targets, PointsView<Real> points, const Real* locals, int n_rhs,
                                   Real* potentials) const {
  const auto leaves = targets.leaves();
  const auto nr = static_cast<std::size_t>(n_rhs);
  const auto n_leaves = static_cast<std::ptrdiff_t>(leaves.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t l = 0; l < n_leaves; ++l) {
    const auto leaf = static_cast<std::size_t>(l);
    const auto surf = cast_points<Real>(box_surface(targets, leaves[leaf], SurfaceKind::DownwardEquivalent).points);
    const auto [p0, p1] = targets.leaf_points(leaf);
    laplace::accumulate(surf.view(), locals + leaf * nr * n_equiv_, n_equiv_, points.subset(p0, p1),
                        potentials + p0, points.size, n_rhs);
  }
}

template <class Real>
std::size_t p2p(const Octree& sources, PointsView<Real> source_points, const Real* charges, const Octree& targets,
                PointsView<Real> target_points, int n_rhs, Real* potentials) {
  if (sources.depth() != targets.depth()) fail(ErrorKind::Config, "source and target trees differ in depth");
  const auto leaves = targets.leaves();
  const auto n_leaves = static_cast<std::ptrdiff_t>(leaves.size());
  std::size_t pairs = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : pairs)
  for (std::ptrdiff_t l = 0; l < n_leaves; ++l) {
    const auto leaf = static_cast<std::size_t>(l);
    const auto [t0, t1] = targets.leaf_points(leaf);
    const auto tview = target_points.subset(t0, t1);
    auto near = neighbors(leaves[leaf]);
    near.push_back(leaves[leaf]);
    std::sort(near.begin(), near.end());
    for (const auto& key : near) {
      const auto s = sources.find(key);
      if (!s) continue;
      const auto [s0, s1] = sources.leaf_points(*s);
      laplace::accumulate(source_points.subset(s0, s1), charges + s0, source_points.size, tview, potentials + t0,
                          target_points.size, n_rhs);
      pairs += (t1 - t0) * (s1 - s0);
    }
  }
  return pairs;
}

template class ExpansionOperators<float>;
template class ExpansionOperators<double>;
template std::size_t p2p(const Octree&, PointsView<float>, const float*, const Octree&, PointsView<float>, int,
                         float*);
template std::size_t p2p(const Octree&, PointsView<double>, const double*, const Octree&, PointsView<double>, int,
                         double*);

}  // namespace kifmm
