#include "kifmm/fmm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "kifmm/error.hpp"

namespace kifmm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::Config, what);
}

}  // namespace

void FmmConfig::validate() const {
  require(depth >= 2 && depth <= MortonKey::kMaxLevel, "depth must lie in [2, 16]");
  require(equivalent_order >= 2, "equivalent order must be at least 2");
  require(check_order >= equivalent_order, "check order must be at least the equivalent order");
  require(backend != Backend::Fft || check_order == equivalent_order,
          "the FFT back end requires equal check and equivalent orders");
  require(sigma_min >= 0 && sigma_min < 1, "sigma_min must lie in [0, 1)");
  require(oversamples >= 0, "oversamples must be non-negative");
  require(rank_estimate >= 0, "rank estimate must be non-negative");
  require(alpha >= 0, "alpha must be non-negative");
  require(block_size >= 1, "block size must be positive");
  require(n_rhs >= 1, "n_rhs must be positive");
  require(inner_scale > 1 && outer_scale > inner_scale, "surface scales must satisfy 1 < inner < outer");
  require(p2m_block >= 1 && m2m_block >= 1, "sibling block sizes must be positive");
}

ExpansionConfig FmmConfig::expansion() const {
  ExpansionConfig e;
  e.equivalent_order = equivalent_order;
  e.check_order = check_order;
  e.inner_scale = inner_scale;
  e.outer_scale = outer_scale;
  e.alpha = alpha;
  e.p2m_block = p2m_block;
  e.m2m_block = m2m_block;
  return e;
}

namespace {

template <class Real>
PointSet<Real> sorted_points(const Octree& tree) {
  PointSet<Real> p(tree.n_points());
  for (std::size_t i = 0; i < tree.n_points(); ++i) {
    p.x[i] = static_cast<Real>(tree.x()[i]);
    p.y[i] = static_cast<Real>(tree.y()[i]);
    p.z[i] = static_cast<Real>(tree.z()[i]);
  }
  return p;
}

const FmmConfig& validated(const FmmConfig& c) {
  c.validate();
  return c;
}

std::span<const Point3> nonempty(std::span<const Point3> p, const char* what) {
  if (p.empty()) fail(ErrorKind::Input, std::string(what) + " point set is empty");
  return p;
}

}  // namespace

template <class Real>
Fmm<Real>::Fmm(std::span<const Point3> sources, std::span<const Point3> targets, const FmmConfig& config)
    : config_(validated(config)),
      source_points_(nonempty(sources, "source").begin(), sources.end()),
      target_points_(nonempty(targets, "target").begin(), targets.end()),
      sources_(source_points_, config.depth, Domain::bounding(source_points_, target_points_)),
      targets_(target_points_, config.depth, sources_.domain()) {
  const auto t0 = Clock::now();
  sorted_sources_ = sorted_points<Real>(sources_);
  sorted_targets_ = sorted_points<Real>(targets_);
  const auto exp = config_.expansion();
  const Domain& domain = sources_.domain();
  expansion_ = std::make_unique<ExpansionOperators<Real>>(exp, domain);
  if (config_.backend == Backend::Blas) {
    BlasM2lConfig b;
    b.sigma_min = config_.sigma_min;
    b.rank_estimate = config_.rank_estimate;
    b.oversamples = config_.oversamples;
    b.seed = config_.seed;
    b.deterministic = config_.deterministic_svd;
    blas_ = std::make_unique<M2lBlasOperators<Real>>(exp, b, domain);
    blas_workspace_.resize(static_cast<std::size_t>(config_.depth) + 1);
    buckets_.resize(static_cast<std::size_t>(config_.depth) + 1);
    for (int l = 2; l <= config_.depth; ++l) buckets_[static_cast<std::size_t>(l)] = bucket_level(sources_, targets_, l);
  } else {
    fft_ = std::make_unique<M2lFftOperators<Real>>(exp, domain);
  }
  timings_.setup = seconds_since(t0);
}

template <class Real>
Fmm<Real>::~Fmm() = default;

template <class Real>
std::vector<Real> Fmm<Real>::evaluate(std::span<const Real> charges) {
  const auto nr = static_cast<std::size_t>(config_.n_rhs);
  const std::size_t ns = n_sources(), nt = n_targets();
  if (charges.size() != ns * nr) {
    fail(ErrorKind::Shape, "charge vector length " + std::to_string(charges.size()) + " does not match " +
                               std::to_string(ns) + " sources x " + std::to_string(nr) + " rhs");
  }
  const int d = config_.depth;
  const int n_rhs = config_.n_rhs;
  const std::size_t ne = expansion_->n_equiv(), nc = expansion_->n_check();
  const auto total0 = Clock::now();
  const double setup = timings_.setup;
  timings_ = Timings{};
  timings_.setup = setup;
  counters_ = Counters{};
  counters_.m2l_calls.assign(static_cast<std::size_t>(d) + 1, 0);

  std::vector<Real> q(ns * nr);
  const auto sperm = sources_.permutation();
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t i = 0; i < ns; ++i) q[r * ns + i] = charges[r * ns + sperm[i]];

  std::vector<std::vector<Real>> multipoles(static_cast<std::size_t>(d) + 1);
  for (int l = 0; l <= d; ++l) multipoles[static_cast<std::size_t>(l)].assign(ne * sources_.n_keys(l) * nr, Real(0));

  auto t = Clock::now();
  expansion_->p2m(sources_, sorted_sources_.view(), q.data(), n_rhs, multipoles[static_cast<std::size_t>(d)].data());
  timings_.p2m = seconds_since(t);

  t = Clock::now();
  for (int l = d; l >= 1; --l) {
    expansion_->m2m(sources_, l, n_rhs, multipoles[static_cast<std::size_t>(l)].data(),
                    multipoles[static_cast<std::size_t>(l - 1)].data());
  }
  timings_.m2m = seconds_since(t);

  std::vector<Real> parent_locals;
  std::vector<Real> locals;
  for (int l = 2; l <= d; ++l) {
    const std::size_t n_tgt = targets_.n_keys(l);
    locals.assign(ne * n_tgt * nr, Real(0));
    if (l > 2) {
      t = Clock::now();
      expansion_->l2l(targets_, l, n_rhs, parent_locals.data(), locals.data());
      timings_.l2l += seconds_since(t);
    }
    t = Clock::now();
    auto& check = check_buffer_;
    check.assign(nc * n_tgt * nr, Real(0));
    const auto& m = multipoles[static_cast<std::size_t>(l)];
    if (blas_) {
      BlasApplyOptions opt;
      opt.strategy = config_.strategy;
      counters_.m2l_calls[static_cast<std::size_t>(l)] =
          apply_level(*blas_, buckets_[static_cast<std::size_t>(l)], std::span<const Real>(m), sources_.n_keys(l),
                      std::span<Real>(check), n_tgt, n_rhs, opt,
                      &blas_workspace_[static_cast<std::size_t>(l)]);
    } else {
      m2l_fft_level(*fft_, sources_, targets_, l, std::span<const Real>(m), std::span<Real>(check), n_rhs,
                    config_.block_size, &fft_workspace_);
    }
    expansion_->downward_solve(l, check.data(), locals.data(), n_tgt * nr, true);
    counters_.downward_slots += locals.size();
    timings_.m2l += seconds_since(t);
    parent_locals.swap(locals);
  }

  std::vector<Real> pot(nt * nr, Real(0));
  t = Clock::now();
  expansion_->l2p(targets_, sorted_targets_.view(), parent_locals.data(), n_rhs, pot.data());
  timings_.l2p = seconds_since(t);

  t = Clock::now();
  counters_.p2p_pairs = p2p(sources_, sorted_sources_.view(), q.data(), targets_, sorted_targets_.view(), n_rhs,
                            pot.data());
  timings_.p2p = seconds_since(t);

  std::vector<Real> out(nt * nr);
  const auto tperm = targets_.permutation();
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t i = 0; i < nt; ++i) out[r * nt + tperm[i]] = pot[r * nt + i];
  timings_.evaluate = seconds_since(total0);
  return out;
}

template <class Real>
std::size_t Fmm<Real>::sample_leaf() const {
  std::size_t best = 0, best_count = 0;
  for (std::size_t l = 0; l < targets_.leaves().size(); ++l) {
    const auto [b, e] = targets_.leaf_points(l);
    if (e - b > best_count) {
      best = l;
      best_count = e - b;
    }
  }
  return best;
}

template <class Real>
ErrorReport Fmm<Real>::relative_error(std::span<const Real> charges, std::span<const Real> potentials,
                                      std::optional<std::size_t> leaf) const {
  const auto nr = static_cast<std::size_t>(config_.n_rhs);
  const std::size_t ns = n_sources(), nt = n_targets();
  if (charges.size() != ns * nr || potentials.size() != nt * nr) {
    fail(ErrorKind::Shape, "charge or potential length does not match the instance");
  }
  ErrorReport rep;
  rep.leaf = leaf.value_or(sample_leaf());
  if (rep.leaf >= targets_.leaves().size()) fail(ErrorKind::Input, "leaf index out of range");
  const auto [b, e] = targets_.leaf_points(rep.leaf);
  if (b == e) fail(ErrorKind::Input, "sample leaf is empty");
  const auto tperm = targets_.permutation();

  PointSet<double> src(source_points_);
  PointSet<double> tgt(e - b);
  for (std::size_t i = b; i < e; ++i) {
    tgt.x[i - b] = targets_.x()[i];
    tgt.y[i - b] = targets_.y()[i];
    tgt.z[i - b] = targets_.z()[i];
  }
  std::vector<double> q(charges.begin(), charges.end());
  const auto direct = laplace::direct_potentials<double>(src.view(), q, tgt.view(), config_.n_rhs);

  const std::size_t m = e - b;
  rep.per_rhs.assign(nr, 0.0);
  for (std::size_t r = 0; r < nr; ++r) {
    double sum = 0;
    std::size_t used = 0, skipped = 0;
    for (std::size_t i = 0; i < m; ++i) {
      const double ref = direct[r * m + i];
      if (ref == 0.0) {
        ++skipped;
        continue;
      }
      const double fmm = static_cast<double>(potentials[r * nt + tperm[b + i]]);
      sum += std::abs(fmm - ref) / std::abs(ref);
      ++used;
    }
    rep.per_rhs[r] = used ? sum / static_cast<double>(used) : 0.0;
    rep.error = std::max(rep.error, rep.per_rhs[r]);
    if (r == 0) {
      rep.samples = used;
      rep.excluded = skipped;
    }
  }
  return rep;
}

template class Fmm<float>;
template class Fmm<double>;

}  // namespace kifmm
