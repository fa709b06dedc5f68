#pragma once

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "kifmm/expansion.hpp"
#include "kifmm/octree.hpp"

namespace kifmm {

/// Real 2P x 2P x 2P grid carrying a surface density for circular convolution.
/// Surface point (i, j, k) is embedded at grid slot (i + P, j + P, k + P) and its
/// convolution result is read at slot (i, j, k); slots are row-major, z fastest.
struct ConvolutionGrid {
  int order = 0;
  int extent = 0;           // 2P
  std::size_t size = 0;     // extent^3
  std::size_t n_freq = 0;   // extent^2 * (extent / 2 + 1), real-input transform length
  std::vector<std::size_t> embed_index;
  std::vector<std::size_t> read_index;

  /// Zero-fills grid then writes density at the embedded slots.
  template <class Real>
  void embed(const Real* density, Real* grid) const {
    std::fill(grid, grid + size, Real(0));
    for (std::size_t n = 0; n < embed_index.size(); ++n) grid[embed_index[n]] = density[n];
  }
};

/// Throws Parameter for order < 2.
ConvolutionGrid build_conv_grid(int order);

/// Real kernel grid whose circular convolution with an embedded source density at
/// offset t * box_side yields the target check potentials:
/// g[m] = G(-t h + (m - P) delta) for m in [1, 2P - 1]^3, zero when any m_a = 0,
/// with delta = scale * h / (P - 1).
std::vector<double> kernel_grid(const ConvolutionGrid& grid, double box_side, double scale, const TransferVector& t);

/// [box][freq] -> [freq][box] and back, for n_boxes spectra of n_freq entries.
template <class T>
void to_frequency_order(std::span<const T> box_major, std::size_t n_boxes, std::size_t n_freq, std::span<T> freq_major);
template <class T>
void from_frequency_order(std::span<const T> freq_major, std::size_t n_boxes, std::size_t n_freq,
                          std::span<T> box_major);

/// Kernel DFTs for the 26 halo positions x 64 (target child, source child) pairs,
/// stored [halo][freq][target_child * 8 + source_child] at the reference level.
/// Near-field pairs hold zeros. Requires equal check and equivalent orders.
template <class Real>
class M2lFftOperators {
 public:
  M2lFftOperators(const ExpansionConfig& config, const Domain& domain, int reference_level = 2);
  ~M2lFftOperators();
  M2lFftOperators(const M2lFftOperators&) = delete;
  M2lFftOperators& operator=(const M2lFftOperators&) = delete;

  const ConvolutionGrid& grid() const { return grid_; }
  std::size_t n_freq() const { return grid_.n_freq; }
  std::size_t n_equiv() const { return n_equiv_; }
  int reference_level() const { return reference_level_; }
  double level_scale(int level) const { return laplace::homogeneity_scale(level - reference_level_); }

  std::span<const std::complex<Real>> kernel_sequences(std::size_t halo) const {
    return {kernels_.data() + halo * grid_.n_freq * 64, grid_.n_freq * 64};
  }
  bool is_far(std::size_t halo, int target_child, int source_child) const {
    return far_[halo][static_cast<std::size_t>(target_child * 8 + source_child)];
  }

  /// Reference-level check potential of one transfer vector through the stored
  /// kernel DFTs: embed, transform, multiply, inverse transform, extract.
  std::vector<Real> check_potential(const TransferVector& t, std::span<const Real> density) const;

  /// Unnormalized transforms on fftw_malloc-aligned buffers of grid().size reals
  /// and n_freq() complex values. The inverse overwrites its input.
  void forward(Real* grid, std::complex<Real>* spectrum) const;
  void inverse(std::complex<Real>* spectrum, Real* grid) const;

 private:
  struct Plans;

  ConvolutionGrid grid_;
  std::size_t n_equiv_;
  int reference_level_;
  std::vector<std::complex<Real>> kernels_;
  std::array<std::array<bool, 64>, kHaloCount> far_{};
  std::vector<std::array<int, 2>> lookup_;  // transfer vector index -> (halo, slot)
  std::unique_ptr<Plans> plans_;
};

/// Spectrum buffers reused across calls; a fresh tens-of-megabytes allocation per
/// level costs more in page faults than the transforms it feeds.
template <class Real>
struct FftWorkspace {
  std::vector<std::complex<Real>> spectra, acc;
};

/// check (+)= M2L(multipoles) for one level through per-frequency 8x8 Hadamard
/// blocks. Buffers use the level layout of the expansion operators.
/// block_size: target clusters sharing one pass over a kernel chunk.
template <class Real>
void m2l_fft_level(const M2lFftOperators<Real>& ops, const Octree& sources, const Octree& targets, int level,
                   std::span<const Real> multipoles, std::span<Real> check, int n_rhs, int block_size = 32,
                   FftWorkspace<Real>* workspace = nullptr);

}  // namespace kifmm
