#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "kifmm/expansion.hpp"
#include "kifmm/m2l_blas.hpp"
#include "kifmm/m2l_fft.hpp"
#include "kifmm/octree.hpp"

namespace kifmm {

enum class Backend { Blas, Fft };

struct FmmConfig {
  int depth = 3;
  int equivalent_order = 6;
  int check_order = 6;
  Backend backend = Backend::Blas;
  double sigma_min = 1e-6;
  int oversamples = 5;
  int rank_estimate = 0;  // 0: ceil(n_equiv / 2)
  double alpha = 0.0;
  int block_size = 32;  // FFT target clusters per Hadamard pass
  int n_rhs = 1;
  BucketStrategy strategy = BucketStrategy::Auto;
  std::uint64_t seed = 0;
  bool deterministic_svd = false;
  double inner_scale = 1.05;
  double outer_scale = 1.95;
  int p2m_block = 4;
  int m2m_block = 2;

  /// Throws Config on violated invariants.
  void validate() const;
  ExpansionConfig expansion() const;
};

struct Timings {
  double p2m = 0, m2m = 0, m2l = 0, l2l = 0, l2p = 0, p2p = 0;
  double setup = 0;
  double evaluate = 0;
};

struct Counters {
  std::vector<std::size_t> m2l_calls;  // blocked products per level (BLAS back end)
  std::size_t p2p_pairs = 0;
  std::size_t downward_slots = 0;  // local coefficients written by check-to-local solves
};

struct ErrorReport {
  double error = 0;  // max over right-hand sides of the per-rhs mean
  std::vector<double> per_rhs;
  std::size_t leaf = 0;
  std::size_t samples = 0;   // targets in the mean
  std::size_t excluded = 0;  // targets with zero direct potential
};

/// Fixed-geometry FMM instance. Charges and potentials are in input point order,
/// rhs-major: value of point i for rhs r at r * n + i.
template <class Real>
class Fmm {
 public:
  Fmm(std::span<const Point3> sources, std::span<const Point3> targets, const FmmConfig& config);
  ~Fmm();
  Fmm(const Fmm&) = delete;
  Fmm& operator=(const Fmm&) = delete;

  const FmmConfig& config() const { return config_; }
  const Octree& source_tree() const { return sources_; }
  const Octree& target_tree() const { return targets_; }
  std::size_t n_sources() const { return sources_.n_points(); }
  std::size_t n_targets() const { return targets_.n_points(); }

  /// Throws Shape unless charges.size() == n_sources * n_rhs.
  std::vector<Real> evaluate(std::span<const Real> charges);
  std::vector<Real> attach_charges(std::span<const Real> charges) { return evaluate(charges); }

  const Timings& timings() const { return timings_; }
  const Counters& counters() const { return counters_; }

  /// Target leaf holding the most points, lowest Morton key on ties.
  std::size_t sample_leaf() const;

  /// Mean relative error against a double-precision direct sum over all sources,
  /// on the targets of one leaf (default sample_leaf()).
  ErrorReport relative_error(std::span<const Real> charges, std::span<const Real> potentials,
                             std::optional<std::size_t> leaf = std::nullopt) const;

  const ExpansionOperators<Real>& expansion() const { return *expansion_; }
  const M2lBlasOperators<Real>* blas() const { return blas_.get(); }
  const M2lFftOperators<Real>* fft() const { return fft_.get(); }
  const TransferBuckets& buckets(int level) const { return buckets_.at(static_cast<std::size_t>(level)); }

 private:
  FmmConfig config_;
  std::vector<Point3> source_points_, target_points_;
  Octree sources_, targets_;
  PointSet<Real> sorted_sources_, sorted_targets_;
  std::unique_ptr<ExpansionOperators<Real>> expansion_;
  std::unique_ptr<M2lBlasOperators<Real>> blas_;
  std::unique_ptr<M2lFftOperators<Real>> fft_;
  FftWorkspace<Real> fft_workspace_;
  std::vector<BlasWorkspace<Real>> blas_workspace_;  // per level
  std::vector<Real> check_buffer_;
  std::vector<TransferBuckets> buckets_;
  Timings timings_;
  Counters counters_;
};

}  // namespace kifmm
