#include "kifmm/m2l_blas.hpp"

#include <algorithm>
#include <mutex>
#include <numeric>
#include <string>

#include <omp.h>

#include "kifmm/error.hpp"

namespace kifmm {

Matrix<double> transfer_matrix(const ExpansionConfig& config, double box_side, const TransferVector& t) {
  const Point3 center{t.offset[0] * box_side, t.offset[1] * box_side, t.offset[2] * box_side};
  const auto source = surface(config.equivalent_order, center, box_side, config.inner_scale,
                              SurfaceKind::UpwardEquivalent);
  const auto target = surface(config.check_order, Point3{0, 0, 0}, box_side, config.inner_scale,
                              SurfaceKind::DownwardCheck);
  return laplace::assemble_matrix<double>(source.points.view(), target.points.view());
}

Matrix<double> assemble_fat(const ExpansionConfig& config, double box_side) {
  const auto ne = static_cast<Eigen::Index>(surface_point_count(config.equivalent_order));
  const auto nc = static_cast<Eigen::Index>(surface_point_count(config.check_order));
  const auto& tv = all_transfer_vectors();
  Matrix<double> fat(nc, ne * static_cast<Eigen::Index>(tv.size()));
  const auto n = static_cast<std::ptrdiff_t>(tv.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    fat.middleCols(i * ne, ne) = transfer_matrix(config, box_side, tv[static_cast<std::size_t>(i)]);
  }
  return fat;
}

Matrix<double> assemble_thin(const ExpansionConfig& config, double box_side) {
  const auto ne = static_cast<Eigen::Index>(surface_point_count(config.equivalent_order));
  const auto nc = static_cast<Eigen::Index>(surface_point_count(config.check_order));
  const auto& tv = all_transfer_vectors();
  Matrix<double> thin(nc * static_cast<Eigen::Index>(tv.size()), ne);
  const auto n = static_cast<std::ptrdiff_t>(tv.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    thin.middleRows(i * nc, nc) = transfer_matrix(config, box_side, tv[static_cast<std::size_t>(i)]);
  }
  return thin;
}

std::pair<Matrix<double>, Matrix<double>> assemble_fat_thin(const ExpansionConfig& config, double box_side) {
  return {assemble_fat(config, box_side), assemble_thin(config, box_side)};
}

namespace {

linalg::Svd<double> leading_triplets(const Matrix<double>& a, Eigen::Index rank, Eigen::Index oversamples,
                                     std::uint64_t seed, bool deterministic) {
  if (!deterministic) return linalg::rsvd<double>(a, rank, oversamples, seed);
  if (rank < 1 || rank > std::min(a.rows(), a.cols())) fail(ErrorKind::Parameter, "compression rank out of range");
  auto d = linalg::svd<double>(a);
  d.truncate(rank);
  return d;
}

Eigen::Index count_above(const linalg::Vector<double>& s, double sigma_min) {
  if (s.size() == 0 || !(s(0) > 0)) return 0;
  Eigen::Index k = 0;
  while (k < s.size() && s(k) >= sigma_min * s(0)) ++k;
  return k;
}

}  // namespace

Compression compress(const Matrix<double>& fat, const Matrix<double>* thin, double sigma_min, Eigen::Index rank,
                     Eigen::Index oversamples, std::uint64_t seed, bool deterministic) {
  if (!(sigma_min >= 0 && sigma_min < 1)) fail(ErrorKind::Parameter, "sigma_min must lie in [0, 1)");
  Compression c;
  auto f = leading_triplets(fat, rank, oversamples, seed, deterministic);
  Eigen::Index k = count_above(f.s, sigma_min);
  c.sigma_fat = f.s;
  c.u = std::move(f.u);
  if (thin) {
    auto t = leading_triplets(*thin, rank, oversamples, seed, deterministic);
    k = std::max(k, count_above(t.s, sigma_min));
    c.sigma_thin = t.s;
    c.s = std::move(t.v);
  } else {
    c.sigma_thin = c.sigma_fat;
    c.s = c.u;
  }
  if (k == 0) fail(ErrorKind::Parameter, "sigma_min threshold removes every singular value");
  k = std::min(k, rank);
  c.k = k;
  c.u.conservativeResize(Eigen::NoChange, k);
  c.s.conservativeResize(Eigen::NoChange, k);
  return c;
}

Recompressed recompress(const Matrix<double>& c, double sigma_min) {
  auto d = linalg::svd<double>(c);
  const Eigen::Index kt = count_above(d.s, sigma_min);
  d.truncate(kt);
  return {std::move(d.u), d.v * d.s.asDiagonal()};
}

template <class Real>
M2lBlasOperators<Real>::M2lBlasOperators(const ExpansionConfig& expansion, const BlasM2lConfig& config,
                                         const Domain& domain, int reference_level)
    : config_(config),
      n_equiv_(surface_point_count(expansion.equivalent_order)),
      n_check_(surface_point_count(expansion.check_order)),
      reference_level_(reference_level),
      reference_side_(domain.side / static_cast<double>(1u << reference_level)) {
  if (n_equiv_ == 0 || n_check_ == 0) fail(ErrorKind::Parameter, "expansion orders must be at least 2");
  const auto rank = static_cast<Eigen::Index>(config.rank_estimate > 0 ? config.rank_estimate
                                                                       : (n_equiv_ + 1) / 2);
  Compression c;
  {
    Matrix<double> fat = assemble_fat(expansion, reference_side_);
    if (expansion.check_order == expansion.equivalent_order) {
      c = compress(fat, nullptr, config.sigma_min, rank, config.oversamples, config.seed, config.deterministic);
    } else {
      const Matrix<double> thin = assemble_thin(expansion, reference_side_);
      c = compress(fat, &thin, config.sigma_min, rank, config.oversamples, config.seed, config.deterministic);
    }
  }
  k_ = c.k;
  sigma_fat_ = c.sigma_fat;
  u_ = c.u.cast<Real>();
  s_ = c.s.cast<Real>();

  const auto& tv = all_transfer_vectors();
  ubar_.resize(tv.size());
  vbar_t_.resize(tv.size());
  const auto n = static_cast<std::ptrdiff_t>(tv.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(i);
    const Matrix<double> ct = c.u.transpose() * transfer_matrix(expansion, reference_side_, tv[t]) * c.s;
    const auto r = recompress(ct, config.sigma_min);
    ubar_[t] = r.ubar.cast<Real>();
    vbar_t_[t] = r.vbar.transpose().cast<Real>();
  }
}

template <class Real>
Matrix<double> M2lBlasOperators<Real>::reconstruct(std::size_t t) const {
  return u_.template cast<double>() * ubar_.at(t).template cast<double>() *
         (vbar_t_.at(t).template cast<double>() * s_.template cast<double>().transpose());
}

std::size_t TransferBuckets::pair_count() const {
  std::size_t n = 0;
  for (const auto& b : sources) n += b.size();
  return n;
}

std::size_t TransferBuckets::nonempty() const {
  return static_cast<std::size_t>(
      std::count_if(sources.begin(), sources.end(), [](const auto& b) { return !b.empty(); }));
}

TransferBuckets bucket_level(const Octree& sources, const Octree& targets, int level) {
  if (level < 2 || level > std::min(sources.depth(), targets.depth())) {
    fail(ErrorKind::InvalidLevel, "M2L level must lie in [2, depth], got " + std::to_string(level));
  }
  TransferBuckets b;
  b.level = level;
  b.sources.resize(kTransferVectorCount);
  b.targets.resize(kTransferVectorCount);
  const auto tkeys = targets.keys(level);
  for (std::size_t ti = 0; ti < tkeys.size(); ++ti) {
    const auto ta = tkeys[ti].anchor();
    for (const auto& sk : interaction_list(tkeys[ti])) {
      const auto si = sources.find(sk);
      if (!si) continue;
      const auto sa = sk.anchor();
      TransferVector t{{static_cast<int>(sa[0]) - static_cast<int>(ta[0]),
                        static_cast<int>(sa[1]) - static_cast<int>(ta[1]),
                        static_cast<int>(sa[2]) - static_cast<int>(ta[2])}};
      const std::size_t idx = transfer_vector_index(t);
      b.sources[idx].push_back(static_cast<std::uint32_t>(*si));
      b.targets[idx].push_back(static_cast<std::uint32_t>(ti));
    }
  }
  return b;
}

namespace {

// Columns per GEMM chunk; keeps the gathered block cache resident whatever n_rhs is.
constexpr Eigen::Index kChunkColumns = 512;

std::size_t rhs_group(Eigen::Index rank, std::size_t boxes, std::size_t nr, std::size_t scalar_bytes) {
  constexpr std::size_t budget = std::size_t{3} << 19;  // about half of a 2-4 MiB L2
  const std::size_t per_rhs = 2 * static_cast<std::size_t>(rank) * boxes * scalar_bytes;
  return std::clamp<std::size_t>(budget / std::max<std::size_t>(per_rhs, 1), 1, nr);
}

// phi(:, target columns) += Ubar_t Vbar_t^T compressed(:, source columns), one chunk of pairs at a time.
// With locks, each target block is updated under its own mutex.
template <class Real>
void bucket_apply(const M2lBlasOperators<Real>& ops, const TransferBuckets& buckets, std::size_t t,
                  const Matrix<Real>& compressed, Eigen::Index nr, Matrix<Real>& phi, BlasWorkspace<Real>& w,
                  std::vector<std::mutex>* locks) {
  const auto& src = buckets.sources[t];
  const auto& tgt = buckets.targets[t];
  const std::size_t chunk = static_cast<std::size_t>(std::max<Eigen::Index>(1, kChunkColumns / nr));
  const auto width = static_cast<Eigen::Index>(chunk) * nr;
  // Fixed-capacity buffers addressed through corner blocks, so the loop never reallocates.
  if (w.gathered.rows() != ops.rank() || w.gathered.cols() != width) {
    w.gathered.resize(ops.rank(), width);
    w.result.resize(ops.rank(), width);
    w.projected.resize(ops.rank(), width);
  }
  const Eigen::Index kt = ops.rank(t);
  for (std::size_t p0 = 0; p0 < src.size(); p0 += chunk) {
    const std::size_t np = std::min(chunk, src.size() - p0);
    const auto cols = static_cast<Eigen::Index>(np) * nr;
    auto gathered = w.gathered.leftCols(cols);
    Eigen::Map<Matrix<Real>> projected(w.projected.data(), kt, cols);
    auto result = w.result.leftCols(cols);
    for (std::size_t p = 0; p < np; ++p) {
      gathered.middleCols(static_cast<Eigen::Index>(p) * nr, nr) = compressed.middleCols(src[p0 + p] * nr, nr);
    }
    projected.noalias() = ops.vbar_t(t) * gathered;
    result.noalias() = ops.ubar(t) * projected;
    for (std::size_t p = 0; p < np; ++p) {
      const auto block = result.middleCols(static_cast<Eigen::Index>(p) * nr, nr);
      if (locks) {
        std::lock_guard<std::mutex> guard((*locks)[tgt[p0 + p]]);
        phi.middleCols(tgt[p0 + p] * nr, nr) += block;
      } else {
        phi.middleCols(tgt[p0 + p] * nr, nr) += block;
      }
    }
  }
}

}  // namespace

template <class Real>
std::size_t apply_level(const M2lBlasOperators<Real>& ops, const TransferBuckets& buckets,
                        std::span<const Real> multipoles, std::size_t n_sources, std::span<Real> check,
                        std::size_t n_targets, int n_rhs, const BlasApplyOptions& options,
                        BlasWorkspace<Real>* workspace) {
  if (n_rhs < 1) fail(ErrorKind::Shape, "n_rhs must be positive");
  const auto nr = static_cast<std::size_t>(n_rhs);
  if (multipoles.size() != ops.n_equiv() * n_sources * nr) {
    fail(ErrorKind::Shape, "multipole buffer does not match n_equiv x n_sources x n_rhs");
  }
  if (check.size() != ops.n_check() * n_targets * nr) {
    fail(ErrorKind::Shape, "check buffer does not match n_check x n_targets x n_rhs");
  }
  if (buckets.sources.size() != kTransferVectorCount) fail(ErrorKind::Shape, "bucket table is not 316 wide");

  std::vector<std::size_t> order;
  if (options.order) {
    order = *options.order;
  } else {
    order.resize(kTransferVectorCount);
    std::iota(order.begin(), order.end(), std::size_t{0});
  }
  std::erase_if(order, [&](std::size_t t) { return buckets.sources.at(t).empty(); });

  BucketStrategy strategy = options.strategy;
  if (strategy == BucketStrategy::Auto) {
    strategy = omp_get_max_threads() > 16 ? BucketStrategy::Parallel : BucketStrategy::Sequential;
  }
  const auto ne = static_cast<Eigen::Index>(ops.n_equiv()), nc = static_cast<Eigen::Index>(ops.n_check());
  Eigen::Map<const Matrix<Real>> m(multipoles.data(), ne, static_cast<Eigen::Index>(n_sources * nr));
  Eigen::Map<Matrix<Real>> out(check.data(), nc, static_cast<Eigen::Index>(n_targets * nr));
  const auto scale = static_cast<Real>(ops.level_scale(buckets.level));

  // Right-hand sides are swept in groups small enough that the group's compressed
  // and phi blocks stay cache resident across the whole bucket loop.
  const std::size_t group = rhs_group(ops.rank(), std::max(n_sources, n_targets), nr, sizeof(Real));
  BlasWorkspace<Real> local;
  BlasWorkspace<Real>& ws = workspace ? *workspace : local;
  auto &mg = ws.grouped, &compressed = ws.compressed, &phi = ws.phi, &expanded = ws.expanded;
  for (std::size_t r0 = 0; r0 < nr; r0 += group) {
    const std::size_t g = std::min(group, nr - r0);
    const auto eg = static_cast<Eigen::Index>(g);
    if (g == nr) {
      compressed.noalias() = ops.s().transpose() * m;
    } else {
      mg.resize(ne, static_cast<Eigen::Index>(n_sources * g));
      for (std::size_t s = 0; s < n_sources; ++s)
        mg.middleCols(static_cast<Eigen::Index>(s) * eg, eg) = m.middleCols(static_cast<Eigen::Index>(s * nr + r0), eg);
      compressed.noalias() = ops.s().transpose() * mg;
    }
    phi.setZero(ops.rank(), static_cast<Eigen::Index>(n_targets * g));
    if (strategy == BucketStrategy::Sequential) {
      for (const std::size_t t : order) bucket_apply(ops, buckets, t, compressed, eg, phi, ws, nullptr);
    } else {
      std::vector<std::mutex> locks(n_targets);
      const auto n = static_cast<std::ptrdiff_t>(order.size());
#pragma omp parallel
      {
        BlasWorkspace<Real> w;
#pragma omp for schedule(dynamic)
        for (std::ptrdiff_t i = 0; i < n; ++i) {
          bucket_apply(ops, buckets, order[static_cast<std::size_t>(i)], compressed, eg, phi, w, &locks);
        }
      }
    }
    if (g == nr) {
      out.noalias() += scale * (ops.u() * phi);
    } else {
      expanded.noalias() = scale * (ops.u() * phi);
      for (std::size_t s = 0; s < n_targets; ++s)
        out.middleCols(static_cast<Eigen::Index>(s * nr + r0), eg) += expanded.middleCols(static_cast<Eigen::Index>(s) * eg, eg);
    }
  }
  return 2 + order.size();
}

template class M2lBlasOperators<float>;
template class M2lBlasOperators<double>;
template std::size_t apply_level(const M2lBlasOperators<float>&, const TransferBuckets&, std::span<const float>,
                                 std::size_t, std::span<float>, std::size_t, int, const BlasApplyOptions&,
                                 BlasWorkspace<float>*);
template std::size_t apply_level(const M2lBlasOperators<double>&, const TransferBuckets&, std::span<const double>,
                                 std::size_t, std::span<double>, std::size_t, int, const BlasApplyOptions&,
                                 BlasWorkspace<double>*);

}  // namespace kifmm
