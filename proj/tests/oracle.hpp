#pragma once
// Reference implementations used only by the tests. Nothing here calls into the
// library's numerical code: geometry, kernel sums and surfaces are rebuilt from
// their definitions with naive loops.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using P3 = std::array<double, 3>;
using Mat = Eigen::MatrixXd;

// Frozen constants.
inline constexpr double kInvFourPi = 0.079577471545947667884;
inline constexpr int kTransferVectors = 316;
inline constexpr int kMaxInteractionList = 189;
inline constexpr int kHalos = 26;
inline constexpr int kClusterPairs = 64;
inline constexpr int kMaxBlockedCalls = 318;

inline double kernel(const P3& x, const P3& y) {
  const long double dx = x[0] - y[0], dy = x[1] - y[1], dz = x[2] - y[2];
  const long double r = std::sqrt(dx * dx + dy * dy + dz * dz);
  return r == 0 ? 0.0 : static_cast<double>(0.25L / (std::numbers::pi_v<long double> * r));
}

// Naive long-double direct sum.
inline std::vector<double> direct(const std::vector<P3>& src, const std::vector<double>& q, const std::vector<P3>& tgt) {
  std::vector<double> out(tgt.size());
  for (std::size_t i = 0; i < tgt.size(); ++i) {
    long double acc = 0;
    for (std::size_t j = 0; j < src.size(); ++j) {
      const long double dx = tgt[i][0] - src[j][0], dy = tgt[i][1] - src[j][1], dz = tgt[i][2] - src[j][2];
      const long double r = std::sqrt(dx * dx + dy * dy + dz * dz);
      if (r != 0) acc += q[j] / r;
    }
    out[i] = static_cast<double>(acc * 0.25L / std::numbers::pi_v<long double>);
  }
  return out;
}

inline Mat dense(const std::vector<P3>& src, const std::vector<P3>& tgt) {
  Mat k(static_cast<Eigen::Index>(tgt.size()), static_cast<Eigen::Index>(src.size()));
  for (std::size_t i = 0; i < tgt.size(); ++i)
    for (std::size_t j = 0; j < src.size(); ++j) k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kernel(tgt[i], src[j]);
  return k;
}

inline std::vector<P3> uniform(std::size_t n, std::uint64_t seed, double lo = 0, double hi = 1) {
  std::mt19937_64 g(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<P3> p(n);
  for (auto& x : p) x = {u(g), u(g), u(g)};
  return p;
}

inline std::vector<double> values(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 g(seed * 6364136223846793005ull + 1442695040888963407ull);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(g);
  return v;
}

// Surface of a cube: P points per axis, boundary only, x index slowest.
inline std::vector<P3> cube_surface(int p, const P3& c, double side) {
  std::vector<P3> out;
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j)
      for (int k = 0; k < p; ++k) {
        if (i != 0 && i != p - 1 && j != 0 && j != p - 1 && k != 0 && k != p - 1) continue;
        const int idx[3] = {i, j, k};
        P3 x;
        for (int a = 0; a < 3; ++a) x[a] = c[a] - side / 2 + idx[a] * side / (p - 1);
        out.push_back(x);
      }
  return out;
}

// Anchor geometry, independent of the Morton encoding.
using A3 = std::array<int, 3>;

inline int cheb(const A3& a, const A3& b) {
  return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

inline bool admissible(const A3& src, const A3& tgt) {
  const A3 ps{src[0] >> 1, src[1] >> 1, src[2] >> 1}, pt{tgt[0] >> 1, tgt[1] >> 1, tgt[2] >> 1};
  return cheb(ps, pt) <= 1 && cheb(src, tgt) > 1;
}

inline std::vector<A3> level_anchors(int level) {
  const int n = 1 << level;
  std::vector<A3> out;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) out.push_back({i, j, k});
  return out;
}

inline double rel_max(const std::vector<double>& a, const std::vector<double>& ref) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - ref[i]));
    den = std::max(den, std::abs(ref[i]));
  }
  return den == 0 ? num : num / den;
}

template <class V, class W>
double rel_l2(const V& a, const W& ref) {
  long double num = 0, den = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(ref.size()); ++i) {
    const long double d = static_cast<long double>(a[i]) - static_cast<long double>(ref[i]);
    num += d * d;
    den += static_cast<long double>(ref[i]) * static_cast<long double>(ref[i]);
  }
  return den == 0 ? static_cast<double>(std::sqrt(num)) : static_cast<double>(std::sqrt(num / den));
}

inline double spectral(const Mat& a) {
  if (a.size() == 0) return 0;
  const Mat g = a.rows() <= a.cols() ? Mat(a * a.transpose()) : Mat(a.transpose() * a);
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

}  // namespace oracle
