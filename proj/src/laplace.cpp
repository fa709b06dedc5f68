#include "kifmm/laplace.hpp"

#include <algorithm>
#include <array>

#include "kifmm/error.hpp"

namespace kifmm {

template <class Real>
PointSet<Real>::PointSet(std::span<const Point3> pts) : x(pts.size()), y(pts.size()), z(pts.size()) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    x[i] = static_cast<Real>(pts[i][0]);
    y[i] = static_cast<Real>(pts[i][1]);
    z[i] = static_cast<Real>(pts[i][2]);
  }
}

template struct PointSet<float>;
template struct PointSet<double>;

namespace laplace {

double evaluate_2d(const std::array<double, 2>& x, const std::array<double, 2>& y) {
  const double dx = x[0] - y[0], dy = x[1] - y[1];
  const double r2 = dx * dx + dy * dy;
  return r2 > 0.0 ? -0.25 * std::numbers::inv_pi * std::log(r2) : 0.0;
}

template <class Real>
Matrix<Real> assemble_matrix(PointsView<Real> sources, PointsView<Real> targets) {
  if (sources.size == 0 || targets.size == 0) fail(ErrorKind::Input, "kernel matrix needs nonempty point sets");
  Matrix<Real> k(static_cast<Eigen::Index>(targets.size), static_cast<Eigen::Index>(sources.size));
  const Real scale = static_cast<Real>(kInvFourPi);
  for (std::size_t j = 0; j < sources.size; ++j) {
    const Real sx = sources.x[j], sy = sources.y[j], sz = sources.z[j];
    Real* col = k.data() + j * targets.size;
#pragma omp simd
    for (std::size_t i = 0; i < targets.size; ++i) {
      const Real dx = targets.x[i] - sx, dy = targets.y[i] - sy, dz = targets.z[i] - sz;
      const Real r2 = dx * dx + dy * dy + dz * dz;
      col[i] = r2 > Real(0) ? scale / std::sqrt(r2) : Real(0);
    }
  }
  return k;
}

namespace {

constexpr std::size_t kChunk = 128;

}  // namespace

template <class Real>
void accumulate(PointsView<Real> sources, const Real* charges, std::size_t charge_stride, PointsView<Real> targets,
                Real* potentials, std::size_t potential_stride, int n_rhs) {
  const Real scale = static_cast<Real>(kInvFourPi);
  alignas(64) std::array<Real, kChunk> inv;
  constexpr int kMaxRhsAcc = 16;
  for (std::size_t i = 0; i < targets.size; ++i) {
    const Real tx = targets.x[i], ty = targets.y[i], tz = targets.z[i];
    for (int r0 = 0; r0 < n_rhs; r0 += kMaxRhsAcc) {
      const int nr = std::min(kMaxRhsAcc, n_rhs - r0);
      std::array<Real, kMaxRhsAcc> acc{};
      for (std::size_t j0 = 0; j0 < sources.size; j0 += kChunk) {
        const std::size_t m = std::min(kChunk, sources.size - j0);
        const Real* sx = sources.x + j0;
        const Real* sy = sources.y + j0;
        const Real* sz = sources.z + j0;
#pragma omp simd
        for (std::size_t j = 0; j < m; ++j) {
          const Real dx = tx - sx[j], dy = ty - sy[j], dz = tz - sz[j];
          const Real r2 = dx * dx + dy * dy + dz * dz;
          inv[j] = r2 > Real(0) ? Real(1) / std::sqrt(r2) : Real(0);
        }
        for (int r = 0; r < nr; ++r) {
          const Real* q = charges + static_cast<std::size_t>(r0 + r) * charge_stride + j0;
          Real s = 0;
#pragma omp simd reduction(+ : s)
          for (std::size_t j = 0; j < m; ++j) s += inv[j] * q[j];
          acc[static_cast<std::size_t>(r)] += s;
        }
      }
      for (int r = 0; r < nr; ++r) {
        potentials[static_cast<std::size_t>(r0 + r) * potential_stride + i] += scale * acc[static_cast<std::size_t>(r)];
      }
    }
  }
}

template <class Real>
std::vector<Real> direct_potentials(PointsView<Real> sources, std::span<const Real> charges, PointsView<Real> targets,
                                    int n_rhs) {
  if (n_rhs < 1) fail(ErrorKind::Shape, "n_rhs must be positive");
  if (charges.size() != sources.size * static_cast<std::size_t>(n_rhs)) {
    fail(ErrorKind::Shape, "charge vector length does not match sources x n_rhs");
  }
  std::vector<Real> out(targets.size * static_cast<std::size_t>(n_rhs), Real(0));
  constexpr std::size_t kBlock = 64;
  const auto n_blocks = static_cast<std::ptrdiff_t>((targets.size + kBlock - 1) / kBlock);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t b = 0; b < n_blocks; ++b) {
    const std::size_t begin = static_cast<std::size_t>(b) * kBlock;
    const std::size_t end = std::min(targets.size, begin + kBlock);
    accumulate(sources, charges.data(), sources.size, targets.subset(begin, end), out.data() + begin, targets.size,
               n_rhs);
  }
  return out;
}

template Matrix<float> assemble_matrix(PointsView<float>, PointsView<float>);
template Matrix<double> assemble_matrix(PointsView<double>, PointsView<double>);
template void accumulate(PointsView<float>, const float*, std::size_t, PointsView<float>, float*, std::size_t, int);
template void accumulate(PointsView<double>, const double*, std::size_t, PointsView<double>, double*, std::size_t, int);
template std::vector<float> direct_potentials(PointsView<float>, std::span<const float>, PointsView<float>, int);
template std::vector<double> direct_potentials(PointsView<double>, std::span<const double>, PointsView<double>, int);

}  // namespace laplace
}  // namespace kifmm
