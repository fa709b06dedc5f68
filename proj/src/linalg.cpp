#include "kifmm/linalg.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <type_traits>

#include "kifmm/error.hpp"

namespace kifmm::linalg {

namespace {

/// Wide inputs are reduced by a QR of the transpose so the dense SVD runs on a square factor.
template <class Real>
Svd<Real> dense_svd(const Matrix<Real>& a, bool vectors) {
  Svd<Real> out;
  const unsigned opts = vectors ? (Eigen::ComputeThinU | Eigen::ComputeThinV) : 0u;
  if (a.cols() > 2 * a.rows()) {
    const Eigen::Index m = a.rows();
    Eigen::HouseholderQR<Matrix<Real>> qr(a.transpose());
    const Matrix<Real> rt = qr.matrixQR().topLeftCorner(m, m).template triangularView<Eigen::Upper>().transpose();
    Eigen::BDCSVD<Matrix<Real>> d(rt, opts);
    if (d.info() != Eigen::Success) fail(ErrorKind::Numerical, "SVD failed to converge");
    out.s = d.singularValues();
    if (vectors) {
      out.u = d.matrixU();
      out.v = qr.householderQ() * (Matrix<Real>::Identity(a.cols(), m) * d.matrixV());
    }
    return out;
  }
  Eigen::BDCSVD<Matrix<Real>> d(a, opts);
  if (d.info() != Eigen::Success) fail(ErrorKind::Numerical, "SVD failed to converge");
  out.s = d.singularValues();
  if (vectors) {
    out.u = d.matrixU();
    out.v = d.matrixV();
  }
  return out;
}

}  // namespace

template <class Real>
void Svd<Real>::truncate(Eigen::Index rank) {
  rank = std::clamp<Eigen::Index>(rank, 0, s.size());
  u.conservativeResize(Eigen::NoChange, rank);
  v.conservativeResize(Eigen::NoChange, rank);
  s.conservativeResize(rank);
}

template <class Real>
Svd<Real> svd(const Matrix<Real>& a) {
  if (a.size() == 0) {
    Svd<Real> out;
    out.u.resize(a.rows(), 0);
    out.v.resize(a.cols(), 0);
    return out;
  }
  return dense_svd<Real>(a, true);
}

template <class Real>
Vector<Real> singular_values(const Matrix<Real>& a) {
  if (a.size() == 0) return Vector<Real>(0);
  return dense_svd<Real>(a, false).s;
}

template <class Real>
Real spectral_norm(const Matrix<Real>& a) {
  if (a.size() == 0) return Real(0);
  if (a.rows() > 2 * a.cols()) return singular_values<Real>(a.transpose())(0);
  return singular_values<Real>(a)(0);
}

template <class Real>
Matrix<Real> orthonormal_basis(const Matrix<Real>& a) {
  Eigen::HouseholderQR<Matrix<Real>> qr(a);
  return qr.householderQ() * Matrix<Real>::Identity(a.rows(), std::min(a.rows(), a.cols()));
}

template <class Real>
Matrix<Real> gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix<Real> g(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) g(i, j) = static_cast<Real>(dist(gen));
  return g;
}

template <class Real>
Svd<Real> rsvd(const Matrix<Real>& a, Eigen::Index rank, Eigen::Index oversamples, std::uint64_t seed) {
  if (rank < 1 || oversamples < 0) fail(ErrorKind::Parameter, "rSVD rank must be positive and oversamples >= 0");
  const Eigen::Index sketch = rank + oversamples;
  if (sketch > std::min(a.rows(), a.cols())) {
    fail(ErrorKind::Parameter, "rSVD sketch size " + std::to_string(sketch) + " exceeds matrix dimensions");
  }
  Matrix<Real> y = a * gaussian_matrix<Real>(a.cols(), sketch, seed);
  const Matrix<Real> q = orthonormal_basis<Real>(y);
  y.resize(0, 0);
  const Matrix<Real> b = q.transpose() * a;
  Svd<Real> small = svd<Real>(b);
  Svd<Real> out{q * small.u, std::move(small.s), std::move(small.v)};
  out.truncate(rank);
  return out;
}

template struct Svd<float>;
template struct Svd<double>;
template Svd<float> svd(const Matrix<float>&);
template Svd<double> svd(const Matrix<double>&);
template Vector<float> singular_values(const Matrix<float>&);
template Vector<double> singular_values(const Matrix<double>&);
template float spectral_norm(const Matrix<float>&);
template double spectral_norm(const Matrix<double>&);
template Matrix<float> orthonormal_basis(const Matrix<float>&);
template Matrix<double> orthonormal_basis(const Matrix<double>&);
template Matrix<float> gaussian_matrix(Eigen::Index, Eigen::Index, std::uint64_t);
template Matrix<double> gaussian_matrix(Eigen::Index, Eigen::Index, std::uint64_t);
template Svd<float> rsvd(const Matrix<float>&, Eigen::Index, Eigen::Index, std::uint64_t);
template Svd<double> rsvd(const Matrix<double>&, Eigen::Index, Eigen::Index, std::uint64_t);

}  // namespace kifmm::linalg
