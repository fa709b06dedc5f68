// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kifmm/fmm.hpp"
#include "kifmm/laplace.hpp"
#include "kifmm/linalg.hpp"
#include "kifmm/m2l_blas.hpp"
#include "kifmm/m2l_fft.hpp"
#include "kifmm/points.hpp"
#include "oracle.hpp"

using namespace kifmm;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = true;
  std::ostringstream detail;
  void require(bool ok) { pass = pass && ok; }
};

int failures = 0;

void report(const char* id, const char* title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto t0 = Clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " exception: " << e.what();
  }
  if (!o.pass) ++failures;
  std::printf("%s %s  %s:%s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", title, o.detail.str().c_str(), seconds_since(t0));
  std::fflush(stdout);
}

const std::vector<Point3>& uniform_points(std::size_t n) {
  static std::vector<std::pair<std::size_t, std::vector<Point3>>> cache;
  for (auto& [k, v] : cache)
    if (k == n) return v;
  cache.emplace_back(n, generate_points(Distribution::UniformCube, n, 0));
  return cache.back().second;
}

struct Row {
  double eps;
  Backend backend;
  int pe, pc, n_over;
  double sigma;
  int block;
};

FmmConfig row_config(const Row& r) {
  FmmConfig c;
  c.depth = 3;
  c.backend = r.backend;
  c.equivalent_order = r.pe;
  c.check_order = r.pc;
  c.oversamples = r.n_over;
  c.sigma_min = r.sigma;
  c.block_size = r.block;
  return c;
}

template <class Real>
void ladder(Outcome& o, const std::vector<Row>& rows) {
  const auto& p = uniform_points(100000);
  const auto qd = random_charges(p.size(), 1);
  const std::vector<Real> q(qd.begin(), qd.end());
  for (const auto& r : rows) {
    const auto t0 = Clock::now();
    Fmm<Real> f(p, p, row_config(r));
    const auto phi = f.evaluate(q);
    const double t = seconds_since(t0);
    const double err = f.relative_error(q, phi).error;
    const bool ok = err <= 5 * r.eps && t <= 60;
    o.require(ok);
    char buf[160];
    std::snprintf(buf, sizeof buf, " %s eps=%.0e P=%d/%d err=%.2e t=%.1fs%s;", r.backend == Backend::Blas ? "blas" : "fft",
                  r.eps, r.pe, r.pc, err, t, ok ? "" : " (miss)");
    o.detail << buf;
  }
}

double max_rel_dev(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]) / std::abs(b[i]));
  return d;
}

oracle::Mat dense_transfer(int pe, int pc, double h, const TransferVector& t) {
  const oracle::P3 sc{t.offset[0] * h, t.offset[1] * h, t.offset[2] * h};
  return oracle::dense(oracle::cube_surface(pe, sc, 1.05 * h), oracle::cube_surface(pc, {0, 0, 0}, 1.05 * h));
}

}  // namespace

int main() {
  const Domain unit{{0, 0, 0}, 1.0};

  report("AC1", "accuracy ladder, f64, N=1e5, depth 3, err <= 5 eps and <= 60 s per cell", [](Outcome& o) {
    ladder<double>(o, {{1e-7, Backend::Blas, 6, 6, 5, 1e-6, 32},
                       {1e-9, Backend::Blas, 7, 8, 20, 1e-6, 32},
                       {1e-11, Backend::Blas, 9, 11, 5, 1e-6, 32},
                       {1e-7, Backend::Fft, 6, 6, 5, 1e-6, 32},
                       {1e-9, Backend::Fft, 8, 8, 5, 1e-6, 32},
                       {1e-11, Backend::Fft, 10, 10, 5, 1e-6, 32}});
  });

  report("AC2", "single-precision rows, N=1e5, depth 3, err <= 5 eps", [](Outcome& o) {
    ladder<float>(o, {{1e-4, Backend::Blas, 3, 3, 10, 1e-7, 32},
                      {1e-5, Backend::Blas, 5, 7, 5, 1e-2, 32},
                      {1e-4, Backend::Fft, 3, 3, 5, 1e-6, 32},
                      {1e-5, Backend::Fft, 4, 4, 5, 1e-6, 16}});
  });

  report("AC3", "backend equivalence, N=2e4, max componentwise deviation <= 1e-6", [](Outcome& o) {
    const auto& p = uniform_points(20000);
    const auto q = random_charges(p.size(), 1);
    Fmm<double> b(p, p, row_config({1e-7, Backend::Blas, 6, 6, 5, 1e-6, 32}));
    Fmm<double> f(p, p, row_config({1e-7, Backend::Fft, 6, 6, 5, 1e-6, 32}));
    const double dev = max_rel_dev(b.evaluate(q), f.evaluate(q));
    o.require(dev <= 1e-6);
    o.detail << " deviation=" << dev;
  });

  report("AC4", "convolution identity, all 316 vectors, P in {3,6}, <= 1e-12 in < 10 s", [&](Outcome& o) {
    const auto t0 = Clock::now();
    for (int p : {3, 6}) {
      ExpansionConfig c;
      c.equivalent_order = c.check_order = p;
      M2lFftOperators<double> ops(c, unit);
      const auto n = static_cast<Eigen::Index>(ops.n_equiv());
      double worst = 0;
      for (std::size_t i = 0; i < all_transfer_vectors().size(); ++i) {
        const auto& t = all_transfer_vectors()[i];
        const auto q = oracle::values(ops.n_equiv(), 1000 + i);
        const auto got = ops.check_potential(t, q);
        const Eigen::VectorXd ref = dense_transfer(p, p, 0.25, t) * Eigen::Map<const Eigen::VectorXd>(q.data(), n);
        const double e = (Eigen::Map<const Eigen::VectorXd>(got.data(), n) - ref).cwiseAbs().maxCoeff() / ref.cwiseAbs().maxCoeff();
        worst = std::max(worst, e);
      }
      o.require(worst <= 1e-12);
      o.detail << " P=" << p << " worst=" << worst << ";";
    }
    const double t = seconds_since(t0);
    o.require(t < 10);
    o.detail << " t=" << t << "s";
  });

  report("AC5", "compression identity, P=6, 10 random vectors, <= 100 sigma_min", [&](Outcome& o) {
    std::mt19937_64 g(5);
    std::vector<std::size_t> pick(316);
    std::iota(pick.begin(), pick.end(), 0);
    std::shuffle(pick.begin(), pick.end(), g);
    pick.resize(10);
    ExpansionConfig c;
    c.equivalent_order = c.check_order = 6;
    for (double sigma : {1e-4, 1e-6}) {
      BlasM2lConfig b;
      b.sigma_min = sigma;
      M2lBlasOperators<double> ops(c, b, unit);
      double worst = 0;
      for (std::size_t i : pick) {
        const oracle::Mat k = dense_transfer(6, 6, 0.25, all_transfer_vectors()[i]);
        worst = std::max(worst, oracle::spectral(k - ops.reconstruct(i)) / oracle::spectral(k));
      }
      o.require(worst <= 100 * sigma);
      o.detail << " sigma=" << sigma << " k=" << ops.rank() << " worst=" << worst << ";";
    }
  });

  report("AC6", "combinatorics 316 / 189 / 26 / 64 / <= 318", [](Outcome& o) {
    const std::size_t nt = all_transfer_vectors().size();
    std::size_t max_il = 0;
    bool interior_max = false;
    for (const auto& a : oracle::level_anchors(3)) {
      const MortonKey k({std::uint32_t(a[0]), std::uint32_t(a[1]), std::uint32_t(a[2])}, 3);
      const std::size_t s = interaction_list(k).size();
      max_il = std::max(max_il, s);
      const bool interior = std::all_of(a.begin(), a.end(), [](int v) { return v >= 2 && v <= 5; });
      if (s == 189 && interior) interior_max = true;
    }
    // Interior level-2 parent: every halo cluster exists and each contributes
    // 8 x 8 child pairs whose offsets match the keys' anchors.
    const MortonKey parent({1, 2, 1}, 2);
    const auto targets = parent.children();
    std::size_t halos = 0, pairs_ok = 0;
    std::array<std::size_t, 8> far_per_child{};
    for (const auto& h : halo_clusters(parent)) {
      if (!h.source_parent) continue;
      ++halos;
      const auto sources = h.source_parent->children();
      std::size_t pairs = 0;
      for (int ct = 0; ct < 8; ++ct)
        for (int cs = 0; cs < 8; ++cs) {
          const auto off = cluster_pair_offset(h.offset, cs, ct);
          const auto sa = sources[std::size_t(cs)].anchor(), ta = targets[std::size_t(ct)].anchor();
          bool match = true;
          for (int a = 0; a < 3; ++a) match = match && off[std::size_t(a)] == int(sa[std::size_t(a)]) - int(ta[std::size_t(a)]);
          const bool far = is_admissible(sources[std::size_t(cs)], targets[std::size_t(ct)]);
          far_per_child[std::size_t(ct)] += far;
          pairs += match;
        }
      pairs_ok += pairs == std::size_t(oracle::kClusterPairs);
    }
    const bool child_lists = std::all_of(far_per_child.begin(), far_per_child.end(), [](std::size_t v) { return v == 189; });
    const auto& p = uniform_points(20000);
    FmmConfig c;
    c.equivalent_order = c.check_order = 4;
    Fmm<double> f(p, p, c);
    f.evaluate(random_charges(p.size(), 1));
    std::size_t max_calls = 0;
    for (std::size_t l = 2; l < f.counters().m2l_calls.size(); ++l) max_calls = std::max(max_calls, f.counters().m2l_calls[l]);
    o.require(nt == 316 && max_il == 189 && interior_max && halos == 26 && pairs_ok == 26 && child_lists && max_calls <= 318 &&
              max_calls > 0);
    o.detail << " vectors=" << nt << " max_list=" << max_il << (interior_max ? " (interior)" : " (not interior)") << " halos=" << halos
             << " halos_with_64_pairs=" << pairs_ok << (child_lists ? " far_per_child=189" : " far_per_child!=189")
             << " max_blocked_calls=" << max_calls;
  });

  report("AC7", "rSVD of K_fat, P=6, rank 76, N_over 5, seed 0, residual <= 10 x deterministic", [](Outcome& o) {
    ExpansionConfig c;
    c.equivalent_order = c.check_order = 6;
    const Matrix<double> fat = assemble_fat(c, 0.25);
    const Eigen::Index rank = (static_cast<Eigen::Index>(surface_point_count(6)) + 1) / 2;
    const auto s = linalg::rsvd(fat, rank, 5, 0);
    const double resid = oracle::spectral(fat - s.u * s.s.asDiagonal() * s.v.transpose());
    Eigen::SelfAdjointEigenSolver<oracle::Mat> es(fat * fat.transpose());
    Eigen::VectorXd sv = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    std::sort(sv.data(), sv.data() + sv.size(), std::greater<double>());
    const double best = sv(rank);
    o.require(rank == 76 && resid <= 10 * best);
    o.detail << " rank=" << rank << " rsvd=" << resid << " deterministic=" << best << " ratio=" << resid / best;
  });

  report("AC8", "multi-RHS: 10 rhs equal 10 singles to 1e-12, per-rhs M2L time <= single", [](Outcome& o) {
    const auto& p = uniform_points(20000);
    const std::size_t n = p.size();
    const int m = 10;
    std::vector<double> all(n * m);
    for (int r = 0; r < m; ++r) {
      const auto q = random_charges(n, 100 + r);
      std::copy(q.begin(), q.end(), all.begin() + std::ptrdiff_t(r * n));
    }
    for (Backend b : {Backend::Blas, Backend::Fft}) {
      FmmConfig c;
      c.backend = b;
      Fmm<double> single(p, p, c);
      c.n_rhs = m;
      Fmm<double> multi(p, p, c);
      const auto got = multi.evaluate(all);
      double multi_m2l = multi.timings().m2l, single_m2l = 1e300, worst = 0;
      // Interleaved so both sides see the same host noise and sample count.
      for (int r = 0; r < m; ++r) {
        const std::vector<double> q(all.begin() + std::ptrdiff_t(r * n), all.begin() + std::ptrdiff_t((r + 1) * n));
        const auto ref = single.evaluate(q);
        single_m2l = std::min(single_m2l, single.timings().m2l);
        worst = std::max(worst, oracle::rel_max({got.begin() + std::ptrdiff_t(r * n), got.begin() + std::ptrdiff_t((r + 1) * n)}, ref));
        if (r + 1 < m) {
          multi.evaluate(all);
          multi_m2l = std::min(multi_m2l, multi.timings().m2l);
        }
      }
      const double per = multi_m2l / m;
      o.require(worst <= 1e-12 && per <= single_m2l);
      o.detail << " " << (b == Backend::Blas ? "blas" : "fft") << " dev=" << worst << " m2l per-rhs=" << per << "s single=" << single_m2l << "s;";
    }
  });

  report("AC9", "direct_potentials == assemble_matrix * q to 1e-14, 5e3 points", [](Outcome& o) {
    const auto p = uniform_points(5000);
    const auto q = random_charges(p.size(), 9);
    const PointSet<double> s(p);
    const auto direct = laplace::direct_potentials<double>(s.view(), q, s.view());
    const Matrix<double> k = laplace::assemble_matrix<double>(s.view(), s.view());
    const Eigen::VectorXd kq = k * Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    const double e = oracle::rel_max(direct, std::vector<double>(kq.data(), kq.data() + kq.size()));
    o.require(e <= 1e-14);
    o.detail << " rel=" << e;
  });

  report("AC10", "potentials(0) = 0 and potentials(2q) = 2 potentials(q) to 1e-13, per backend", [](Outcome& o) {
    const auto& p = uniform_points(20000);
    const auto q = random_charges(p.size(), 2);
    std::vector<double> q2(q);
    for (double& v : q2) v *= 2;
    for (Backend b : {Backend::Blas, Backend::Fft}) {
      FmmConfig c;
      c.backend = b;
      Fmm<double> f(p, p, c);
      const auto zero = f.evaluate(std::vector<double>(p.size(), 0.0));
      const bool all_zero = std::all_of(zero.begin(), zero.end(), [](double v) { return v == 0.0; });
      auto a = f.evaluate(q);
      for (double& v : a) v *= 2;
      const double e = oracle::rel_max(f.evaluate(q2), a);
      o.require(all_zero && e <= 1e-13);
      o.detail << " " << (b == Backend::Blas ? "blas" : "fft") << " zero=" << (all_zero ? "yes" : "no") << " linear=" << e << ";";
    }
  });

  std::printf("%d of 10 criteria failed\n", failures);
  return failures ? 1 : 0;
}
