#include "kifmm/m2l_fft.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include <fftw3.h>

#include "kifmm/error.hpp"

namespace kifmm {

ConvolutionGrid build_conv_grid(int order) {
  const auto idx = surface_indices(order);
  ConvolutionGrid g;
  g.order = order;
  g.extent = 2 * order;
  const auto n = static_cast<std::size_t>(g.extent);
  g.size = n * n * n;
  g.n_freq = n * n * (n / 2 + 1);
  g.embed_index.reserve(idx.size());
  g.read_index.reserve(idx.size());
  const auto slot = [n](std::size_t i, std::size_t j, std::size_t k) { return (i * n + j) * n + k; };
  const auto p = static_cast<std::size_t>(order);
  for (const auto& a : idx) {
    const auto i = static_cast<std::size_t>(a[0]), j = static_cast<std::size_t>(a[1]),
               k = static_cast<std::size_t>(a[2]);
    g.embed_index.push_back(slot(i + p, j + p, k + p));
    g.read_index.push_back(slot(i, j, k));
  }
  return g;
}

std::vector<double> kernel_grid(const ConvolutionGrid& grid, double box_side, double scale, const TransferVector& t) {
  const int n = grid.extent, p = grid.order;
  const double delta = scale * box_side / (p - 1);
  std::vector<double> g(grid.size, 0.0);
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < n; ++j)
      for (int k = 1; k < n; ++k) {
        const double dx = -t.offset[0] * box_side + (i - p) * delta;
        const double dy = -t.offset[1] * box_side + (j - p) * delta;
        const double dz = -t.offset[2] * box_side + (k - p) * delta;
        const double r2 = dx * dx + dy * dy + dz * dz;
        g[(static_cast<std::size_t>(i) * n + j) * n + k] = r2 > 0 ? laplace::kInvFourPi / std::sqrt(r2) : 0.0;
      }
  return g;
}

template <class T>
void to_frequency_order(std::span<const T> box_major, std::size_t n_boxes, std::size_t n_freq,
                        std::span<T> freq_major) {
  if (box_major.size() != n_boxes * n_freq || freq_major.size() != n_boxes * n_freq) {
    fail(ErrorKind::Shape, "frequency reordering buffers do not match n_boxes x n_freq");
  }
  for (std::size_t b = 0; b < n_boxes; ++b)
    for (std::size_t f = 0; f < n_freq; ++f) freq_major[f * n_boxes + b] = box_major[b * n_freq + f];
}

template <class T>
void from_frequency_order(std::span<const T> freq_major, std::size_t n_boxes, std::size_t n_freq,
                          std::span<T> box_major) {
  if (box_major.size() != n_boxes * n_freq || freq_major.size() != n_boxes * n_freq) {
    fail(ErrorKind::Shape, "frequency reordering buffers do not match n_boxes x n_freq");
  }
  for (std::size_t f = 0; f < n_freq; ++f)
    for (std::size_t b = 0; b < n_boxes; ++b) box_major[b * n_freq + f] = freq_major[f * n_boxes + b];
}

namespace {

template <class Real>
struct Fftw;

template <>
struct Fftw<double> {
  using Plan = fftw_plan;
  static Plan r2c(int n, double* in, std::complex<double>* out) {
    return fftw_plan_dft_r2c_3d(n, n, n, in, reinterpret_cast<fftw_complex*>(out), FFTW_ESTIMATE);
  }
  static Plan c2r(int n, std::complex<double>* in, double* out) {
    return fftw_plan_dft_c2r_3d(n, n, n, reinterpret_cast<fftw_complex*>(in), out, FFTW_ESTIMATE);
  }
  static void run(Plan p, double* in, std::complex<double>* out) {
    fftw_execute_dft_r2c(p, in, reinterpret_cast<fftw_complex*>(out));
  }
  static void run(Plan p, std::complex<double>* in, double* out) {
    fftw_execute_dft_c2r(p, reinterpret_cast<fftw_complex*>(in), out);
  }
  static void destroy(Plan p) { fftw_destroy_plan(p); }
};

template <>
struct Fftw<float> {
  using Plan = fftwf_plan;
  static Plan r2c(int n, float* in, std::complex<float>* out) {
    return fftwf_plan_dft_r2c_3d(n, n, n, in, reinterpret_cast<fftwf_complex*>(out), FFTW_ESTIMATE);
  }
  static Plan c2r(int n, std::complex<float>* in, float* out) {
    return fftwf_plan_dft_c2r_3d(n, n, n, reinterpret_cast<fftwf_complex*>(in), out, FFTW_ESTIMATE);
  }
  static void run(Plan p, float* in, std::complex<float>* out) {
    fftwf_execute_dft_r2c(p, in, reinterpret_cast<fftwf_complex*>(out));
  }
  static void run(Plan p, std::complex<float>* in, float* out) {
    fftwf_execute_dft_c2r(p, reinterpret_cast<fftwf_complex*>(in), out);
  }
  static void destroy(Plan p) { fftwf_destroy_plan(p); }
};

/// fftw_malloc-backed array; alignment matches the planner's buffers.
template <class T>
class Aligned {
 public:
  explicit Aligned(std::size_t n) : p_(static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)))) {
    if (!p_) fail(ErrorKind::Numerical, "aligned allocation failed");
    std::fill(p_, p_ + n, T{});
  }
  ~Aligned() { fftw_free(p_); }
  Aligned(const Aligned&) = delete;
  Aligned& operator=(const Aligned&) = delete;
  T* get() const { return p_; }

 private:
  T* p_;
};

template <class Real>
inline void hadamard8(const Real* __restrict k, const Real* __restrict m, Real* __restrict acc) {
  for (int ct = 0; ct < 8; ++ct) {
    const Real* row = k + ct * 16;
    Real re = 0, im = 0;
    for (int cs = 0; cs < 8; ++cs) {
      const Real kr = row[2 * cs], ki = row[2 * cs + 1];
      const Real mr = m[2 * cs], mi = m[2 * cs + 1];
      re += kr * mr - ki * mi;
      im += kr * mi + ki * mr;
    }
    acc[2 * ct] += re;
    acc[2 * ct + 1] += im;
  }
}

// hadamard8 for nr spectra of one frequency stored back to back. K is split and
// transposed once, then each column update vectorizes over the 8 target children.
template <class Real>
inline void hadamard8_batch(const Real* __restrict k, const Real* __restrict m, Real* __restrict acc, std::size_t nr) {
  alignas(64) Real kr[8][8], ki[8][8];
  for (int ct = 0; ct < 8; ++ct)
    for (int cs = 0; cs < 8; ++cs) {
      kr[cs][ct] = k[ct * 16 + 2 * cs];
      ki[cs][ct] = k[ct * 16 + 2 * cs + 1];
    }
  for (std::size_t r = 0; r < nr; ++r) {
    const Real* mv = m + r * 16;
    Real* av = acc + r * 16;
    alignas(64) Real re[8] = {}, im[8] = {};
    for (int cs = 0; cs < 8; ++cs) {
      const Real mr = mv[2 * cs], mi = mv[2 * cs + 1];
      for (int ct = 0; ct < 8; ++ct) {
        re[ct] += kr[cs][ct] * mr - ki[cs][ct] * mi;
        im[ct] += kr[cs][ct] * mi + ki[cs][ct] * mr;
      }
    }
    for (int ct = 0; ct < 8; ++ct) {
      av[2 * ct] += re[ct];
      av[2 * ct + 1] += im[ct];
    }
  }
}

}  // namespace

template <class Real>
struct M2lFftOperators<Real>::Plans {
  typename Fftw<Real>::Plan r2c{}, c2r{};
  ~Plans() {
    if (r2c) Fftw<Real>::destroy(r2c);
    if (c2r) Fftw<Real>::destroy(c2r);
  }
};

template <class Real>
M2lFftOperators<Real>::M2lFftOperators(const ExpansionConfig& config, const Domain& domain, int reference_level)
    : reference_level_(reference_level) {
  if (config.check_order != config.equivalent_order) {
    fail(ErrorKind::Config, "FFT M2L requires equal check and equivalent orders");
  }
  grid_ = build_conv_grid(config.equivalent_order);
  n_equiv_ = surface_point_count(config.equivalent_order);
  const int n = grid_.extent;
  const std::size_t nf = grid_.n_freq;

  plans_ = std::make_unique<Plans>();
  {
    Aligned<Real> g(grid_.size);
    Aligned<std::complex<Real>> s(nf);
    plans_->r2c = Fftw<Real>::r2c(n, g.get(), s.get());
    plans_->c2r = Fftw<Real>::c2r(n, s.get(), g.get());
  }

  // One spectrum per distinct transfer vector, then replicated into halo slots.
  const double h = domain.side / static_cast<double>(1u << reference_level);
  const auto& tv = all_transfer_vectors();
  std::vector<std::complex<double>> unique(tv.size() * nf);
  {
    Aligned<double> g(grid_.size);
    Aligned<std::complex<double>> s(nf);
    auto plan = Fftw<double>::r2c(n, g.get(), s.get());
    for (std::size_t i = 0; i < tv.size(); ++i) {
      const auto kg = kernel_grid(grid_, h, config.inner_scale, tv[i]);
      std::copy(kg.begin(), kg.end(), g.get());
      Fftw<double>::run(plan, g.get(), s.get());
      std::copy(s.get(), s.get() + nf, unique.begin() + static_cast<std::ptrdiff_t>(i * nf));
    }
    Fftw<double>::destroy(plan);
  }

  kernels_.assign(kHaloCount * nf * 64, std::complex<Real>(0));
  lookup_.assign(tv.size(), {-1, -1});
  const auto& halos = halo_offsets();
  for (std::size_t hi = 0; hi < kHaloCount; ++hi) {
    for (int ct = 0; ct < 8; ++ct) {
      for (int cs = 0; cs < 8; ++cs) {
        const auto off = cluster_pair_offset(halos[hi], cs, ct);
        const int cheb = std::max({std::abs(off[0]), std::abs(off[1]), std::abs(off[2])});
        const std::size_t slot = static_cast<std::size_t>(ct * 8 + cs);
        if (cheb <= 1) continue;
        far_[hi][slot] = true;
        const std::size_t ti = transfer_vector_index(TransferVector{off});
        if (lookup_[ti][0] < 0) lookup_[ti] = {static_cast<int>(hi), static_cast<int>(slot)};
        const std::complex<double>* src = unique.data() + ti * nf;
        std::complex<Real>* dst = kernels_.data() + hi * nf * 64 + slot;
        for (std::size_t f = 0; f < nf; ++f) dst[f * 64] = std::complex<Real>(src[f]);
      }
    }
  }
}

template <class Real>
M2lFftOperators<Real>::~M2lFftOperators() = default;

template <class Real>
void M2lFftOperators<Real>::forward(Real* grid, std::complex<Real>* spectrum) const {
  Fftw<Real>::run(plans_->r2c, grid, spectrum);
}

template <class Real>
void M2lFftOperators<Real>::inverse(std::complex<Real>* spectrum, Real* grid) const {
  Fftw<Real>::run(plans_->c2r, spectrum, grid);
}

template <class Real>
std::vector<Real> M2lFftOperators<Real>::check_potential(const TransferVector& t, std::span<const Real> density) const {
  if (density.size() != n_equiv_) fail(ErrorKind::Shape, "density length does not match the surface");
  const auto [hi, slot] = lookup_.at(transfer_vector_index(t));
  const std::size_t nf = grid_.n_freq;
  Aligned<Real> g(grid_.size);
  Aligned<std::complex<Real>> s(nf);
  grid_.embed(density.data(), g.get());
  forward(g.get(), s.get());
  const std::complex<Real>* k = kernels_.data() + static_cast<std::size_t>(hi) * nf * 64 + static_cast<std::size_t>(slot);
  for (std::size_t f = 0; f < nf; ++f) {
    const Real kr = k[f * 64].real(), ki = k[f * 64].imag();
    const Real mr = s.get()[f].real(), mi = s.get()[f].imag();
    s.get()[f] = {kr * mr - ki * mi, kr * mi + ki * mr};
  }
  inverse(s.get(), g.get());
  std::vector<Real> out(n_equiv_);
  const Real norm = Real(1) / static_cast<Real>(grid_.size);
  for (std::size_t a = 0; a < n_equiv_; ++a) out[a] = norm * g.get()[grid_.read_index[a]];
  return out;
}

template <class Real>
void m2l_fft_level(const M2lFftOperators<Real>& ops, const Octree& sources, const Octree& targets, int level,
                   std::span<const Real> multipoles, std::span<Real> check, int n_rhs, int block_size,
                   FftWorkspace<Real>* workspace) {
  if (level < 2 || level > std::min(sources.depth(), targets.depth())) {
    fail(ErrorKind::InvalidLevel, "M2L level must lie in [2, depth], got " + std::to_string(level));
  }
  if (n_rhs < 1) fail(ErrorKind::Shape, "n_rhs must be positive");
  if (block_size < 1) fail(ErrorKind::Parameter, "block size must be positive");
  const auto nr = static_cast<std::size_t>(n_rhs);
  const std::size_t ne = ops.n_equiv();
  const std::size_t n_src = sources.n_keys(level), n_tgt = targets.n_keys(level);
  if (multipoles.size() != ne * n_src * nr) fail(ErrorKind::Shape, "multipole buffer does not match level size");
  if (check.size() != ne * n_tgt * nr) fail(ErrorKind::Shape, "check buffer does not match level size");

  const auto& grid = ops.grid();
  const std::size_t nf = ops.n_freq();
  const std::size_t n_sp = sources.n_keys(level - 1), n_tp = targets.n_keys(level - 1);
  using C = std::complex<Real>;

  FftWorkspace<Real> local;
  FftWorkspace<Real>& ws = workspace ? *workspace : local;
  // (a) source spectra, [source parent][freq][rhs][child]; every slab is overwritten
  ws.spectra.resize(n_sp * nr * nf * 8);
  auto& spectra = ws.spectra;
  {
    const auto src_keys = sources.keys(level);
    const auto n = static_cast<std::ptrdiff_t>(n_sp);
#pragma omp parallel
    {
      Aligned<Real> g(grid.size);
      Aligned<C> s(nf);
      std::vector<C> staging(8 * nr * nf);
#pragma omp for schedule(dynamic)
      for (std::ptrdiff_t ip = 0; ip < n; ++ip) {
        const auto sp = static_cast<std::size_t>(ip);
        const auto [c0, c1] = sources.children_range(level - 1, sp);
        std::fill(staging.begin(), staging.end(), C(0));
        for (std::size_t r = 0; r < nr; ++r) {
          for (std::size_t c = c0; c < c1; ++c) {
            const auto ci = static_cast<std::size_t>(src_keys[c].child_index());
            grid.embed(multipoles.data() + (c * nr + r) * ne, g.get());
            ops.forward(g.get(), s.get());
            std::copy(s.get(), s.get() + nf, staging.begin() + static_cast<std::ptrdiff_t>((r * 8 + ci) * nf));
          }
        }
        to_frequency_order<C>(staging, 8 * nr, nf, std::span<C>(spectra.data() + sp * nf * nr * 8, nf * nr * 8));
      }
    }
  }

  // (b) halo sources of every target cluster
  std::vector<std::array<std::int64_t, kHaloCount>> halo_src(n_tp);
  {
    const auto tkeys = targets.keys(level - 1);
    for (std::size_t tp = 0; tp < n_tp; ++tp) {
      const auto clusters = halo_clusters(tkeys[tp]);
      for (std::size_t h = 0; h < kHaloCount; ++h) {
        halo_src[tp][h] = -1;
        if (!clusters[h].source_parent) continue;
        if (const auto idx = sources.find(*clusters[h].source_parent)) halo_src[tp][h] = static_cast<std::int64_t>(*idx);
      }
    }
  }

  // (c) per-frequency 8x8 Hadamard blocks, [target parent][freq][rhs][child]
  auto& acc = ws.acc;
  acc.assign(n_tp * nr * nf * 8, C(0));
  {
    // Frequencies per sweep, shrunk with n_rhs so one sweep's slices of spectra and acc stay in cache.
    const std::size_t chunk = std::max<std::size_t>(1, 32 / nr);
    const auto n_chunks = static_cast<std::ptrdiff_t>((nf + chunk - 1) / chunk);
    const auto block = static_cast<std::size_t>(block_size);
    const auto* sp_data = reinterpret_cast<const Real*>(spectra.data());
    auto* acc_data = reinterpret_cast<Real*>(acc.data());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ic = 0; ic < n_chunks; ++ic) {
      const std::size_t f0 = static_cast<std::size_t>(ic) * chunk;
      const std::size_t f1 = std::min(nf, f0 + chunk);
      for (std::size_t b0 = 0; b0 < n_tp; b0 += block) {
        const std::size_t b1 = std::min(n_tp, b0 + block);
        for (std::size_t h = 0; h < kHaloCount; ++h) {
          const auto kseq = ops.kernel_sequences(h);
          const auto* kd = reinterpret_cast<const Real*>(kseq.data());
          for (std::size_t tp = b0; tp < b1; ++tp) {
            const std::int64_t sp = halo_src[tp][h];
            if (sp < 0) continue;
            const Real* m = sp_data + static_cast<std::size_t>(sp) * nf * nr * 16;
            Real* a = acc_data + tp * nf * nr * 16;
            if (nr == 1) {
              for (std::size_t f = f0; f < f1; ++f) hadamard8(kd + f * 128, m + f * 16, a + f * 16);
            } else {
              for (std::size_t f = f0; f < f1; ++f) hadamard8_batch(kd + f * 128, m + f * nr * 16, a + f * nr * 16, nr);
            }
          }
        }
      }
    }
  }

  // (d) inverse transforms and surface extraction
  {
    const Real norm = static_cast<Real>(ops.level_scale(level) / static_cast<double>(grid.size));
    const auto tgt_keys = targets.keys(level);
    const auto n = static_cast<std::ptrdiff_t>(n_tp);
#pragma omp parallel
    {
      Aligned<Real> g(grid.size);
      Aligned<C> s(nf);
      std::vector<C> staging(8 * nr * nf);
#pragma omp for schedule(dynamic)
      for (std::ptrdiff_t ip = 0; ip < n; ++ip) {
        const auto tp = static_cast<std::size_t>(ip);
        const auto [c0, c1] = targets.children_range(level - 1, tp);
        from_frequency_order<C>(std::span<const C>(acc.data() + tp * nf * nr * 8, nf * nr * 8), 8 * nr, nf, staging);
        for (std::size_t r = 0; r < nr; ++r) {
          for (std::size_t c = c0; c < c1; ++c) {
            const auto ci = static_cast<std::size_t>(tgt_keys[c].child_index());
            const auto* spec = staging.data() + (r * 8 + ci) * nf;
            std::copy(spec, spec + nf, s.get());
            ops.inverse(s.get(), g.get());
            Real* out = check.data() + (c * nr + r) * ne;
            for (std::size_t a = 0; a < ne; ++a) out[a] += norm * g.get()[grid.read_index[a]];
          }
        }
      }
    }
  }
}

template void to_frequency_order(std::span<const std::complex<float>>, std::size_t, std::size_t,
                                 std::span<std::complex<float>>);
template void to_frequency_order(std::span<const std::complex<double>>, std::size_t, std::size_t,
                                 std::span<std::complex<double>>);
template void from_frequency_order(std::span<const std::complex<float>>, std::size_t, std::size_t,
                                   std::span<std::complex<float>>);
template void from_frequency_order(std::span<const std::complex<double>>, std::size_t, std::size_t,
                                   std::span<std::complex<double>>);
template void to_frequency_order(std::span<const double>, std::size_t, std::size_t, std::span<double>);
template void from_frequency_order(std::span<const double>, std::size_t, std::size_t, std::span<double>);
template class M2lFftOperators<float>;
template class M2lFftOperators<double>;
template void m2l_fft_level(const M2lFftOperators<float>&, const Octree&, const Octree&, int, std::span<const float>,
                            std::span<float>, int, int, FftWorkspace<float>*);
template void m2l_fft_level(const M2lFftOperators<double>&, const Octree&, const Octree&, int,
                            std::span<const double>, std::span<double>, int, int, FftWorkspace<double>*);

}  // namespace kifmm
