#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kifmm/expansion.hpp"
#include "kifmm/linalg.hpp"
#include "kifmm/octree.hpp"

namespace kifmm {

struct BlasM2lConfig {
  double sigma_min = 1e-6;  // relative to the largest singular value
  int rank_estimate = 0;    // 0: ceil(n_equiv / 2)
  int oversamples = 5;
  std::uint64_t seed = 0;
  bool deterministic = false;  // full SVD of the fat/thin matrices instead of rSVD
};

/// Dense M2L matrix of one transfer vector for boxes of side `box_side`:
/// source upward-equivalent surface centered at t * box_side, target
/// downward-check surface at the origin. n_check x n_equiv.
Matrix<double> transfer_matrix(const ExpansionConfig& config, double box_side, const TransferVector& t);

/// [K_t1 ... K_t316] in canonical transfer-vector order.
Matrix<double> assemble_fat(const ExpansionConfig& config, double box_side);
/// [K_t1; ...; K_t316].
Matrix<double> assemble_thin(const ExpansionConfig& config, double box_side);
std::pair<Matrix<double>, Matrix<double>> assemble_fat_thin(const ExpansionConfig& config, double box_side);

struct Compression {
  Matrix<double> u;  // n_check x k
  Matrix<double> s;  // n_equiv x k
  Eigen::Index k = 0;
  linalg::Vector<double> sigma_fat, sigma_thin;  // approximate spectra used for the cutoff
};

/// Shared bases of the fat and thin matrices. thin == nullptr reuses U as S,
/// valid when the thin matrix is a block permutation of the fat transpose.
/// Throws Parameter when the threshold leaves no singular value.
Compression compress(const Matrix<double>& fat, const Matrix<double>* thin, double sigma_min, Eigen::Index rank,
                     Eigen::Index oversamples, std::uint64_t seed = 0, bool deterministic = false);

/// C = Ubar * Vbar'^T truncated at sigma_min * sigma_max(C); Vbar' carries the singular values.
struct Recompressed {
  Matrix<double> ubar;   // k x k_t
  Matrix<double> vbar;   // k x k_t
};
Recompressed recompress(const Matrix<double>& c, double sigma_min);

template <class Real>
class M2lBlasOperators {
 public:
  M2lBlasOperators(const ExpansionConfig& expansion, const BlasM2lConfig& config, const Domain& domain,
                   int reference_level = 2);

  const BlasM2lConfig& config() const { return config_; }
  std::size_t n_equiv() const { return n_equiv_; }
  std::size_t n_check() const { return n_check_; }
  Eigen::Index rank() const { return k_; }
  Eigen::Index rank(std::size_t t) const { return ubar_[t].cols(); }
  int reference_level() const { return reference_level_; }
  double reference_side() const { return reference_side_; }

  const Matrix<Real>& u() const { return u_; }
  const Matrix<Real>& s() const { return s_; }
  const Matrix<Real>& ubar(std::size_t t) const { return ubar_[t]; }
  /// Vbar'_t^T, k_t x k.
  const Matrix<Real>& vbar_t(std::size_t t) const { return vbar_t_[t]; }
  const linalg::Vector<double>& sigma_fat() const { return sigma_fat_; }

  /// U Ubar_t Vbar'_t^T S^T at the reference level, in double.
  Matrix<double> reconstruct(std::size_t t) const;

  /// Factor applied to reference-level check potentials at `level`.
  double level_scale(int level) const { return laplace::homogeneity_scale(level - reference_level_); }

 private:
  BlasM2lConfig config_;
  std::size_t n_equiv_, n_check_;
  int reference_level_;
  double reference_side_;
  Eigen::Index k_ = 0;
  Matrix<Real> u_, s_;
  std::vector<Matrix<Real>> ubar_, vbar_t_;
  linalg::Vector<double> sigma_fat_;
};

/// Admissible (source, target) index pairs of one level grouped by transfer vector.
/// Indices refer to keys(level) of the source and target trees.
struct TransferBuckets {
  int level = 0;
  std::vector<std::vector<std::uint32_t>> sources;  // [316][pairs]
  std::vector<std::vector<std::uint32_t>> targets;

  std::size_t pair_count() const;
  std::size_t nonempty() const;
};

/// Throws InvalidLevel for level < 2 or beyond the tree depth.
TransferBuckets bucket_level(const Octree& sources, const Octree& targets, int level);

enum class BucketStrategy { Auto, Sequential, Parallel };

struct BlasApplyOptions {
  BucketStrategy strategy = BucketStrategy::Auto;
  const std::vector<std::size_t>* order = nullptr;  // bucket processing order, default canonical
};

/// Level buffers reused across apply_level calls.
template <class Real>
struct BlasWorkspace {
  Matrix<Real> grouped, compressed, phi, expanded, gathered, projected, result;
};

/// check (+)= M2L(multipoles) for one level. multipoles: n_equiv x (n_sources * n_rhs),
/// check: n_check x (n_targets * n_rhs), column box * n_rhs + rhs. Returns the
/// number of blocked products issued. Throws Shape on buffer size mismatch.
template <class Real>
std::size_t apply_level(const M2lBlasOperators<Real>& ops, const TransferBuckets& buckets,
                        std::span<const Real> multipoles, std::size_t n_sources, std::span<Real> check,
                        std::size_t n_targets, int n_rhs, const BlasApplyOptions& options = {},
                        BlasWorkspace<Real>* workspace = nullptr);

}  // namespace kifmm
