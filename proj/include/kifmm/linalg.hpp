#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "kifmm/laplace.hpp"

namespace kifmm::linalg {

template <class Real>
using Vector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

/// Thin SVD a = u * diag(s) * v^T with singular values descending.
template <class Real>
struct Svd {
  Matrix<Real> u;
  Vector<Real> s;
  Matrix<Real> v;

  /// Keeps the leading `rank` triplets.
  void truncate(Eigen::Index rank);
};

/// Deterministic divide-and-conquer SVD. Throws Numerical on convergence failure.
template <class Real>
Svd<Real> svd(const Matrix<Real>& a);

/// Singular values only.
template <class Real>
Vector<Real> singular_values(const Matrix<Real>& a);

/// Largest singular value.
template <class Real>
Real spectral_norm(const Matrix<Real>& a);

/// Orthonormal basis for the column space of a (thin Householder Q).
template <class Real>
Matrix<Real> orthonormal_basis(const Matrix<Real>& a);

/// Standard normal matrix from a seeded generator.
template <class Real>
Matrix<Real> gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed);

/// One-shot randomized SVD: one Gaussian sketch of rank + oversamples columns,
/// one orthonormalization, one small deterministic SVD; no power iterations.
/// Returns the leading `rank` triplets. Throws Parameter when
/// rank + oversamples exceeds min(rows, cols) or rank < 1.
template <class Real>
Svd<Real> rsvd(const Matrix<Real>& a, Eigen::Index rank, Eigen::Index oversamples, std::uint64_t seed = 0);

}  // namespace kifmm::linalg
