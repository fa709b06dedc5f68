#include "kifmm/kifmm.h"

#include <memory>
#include <new>
#include <string>
#include <variant>
#include <vector>

#include <omp.h>

#include "kifmm/error.hpp"
#include "kifmm/fmm.hpp"
#include "kifmm/points.hpp"

namespace {

thread_local std::string g_last_error;

template <class Real>
struct Instance {
  std::unique_ptr<kifmm::Fmm<Real>> fmm;
  std::vector<Real> charges, potentials;
  bool evaluated = false;
};

kifmm_status to_status(kifmm::ErrorKind k) {
  using kifmm::ErrorKind;
  switch (k) {
    case ErrorKind::Domain: return KIFMM_ERR_DOMAIN;
    case ErrorKind::InvalidLevel: return KIFMM_ERR_INVALID_LEVEL;
    case ErrorKind::Admissibility: return KIFMM_ERR_ADMISSIBILITY;
    case ErrorKind::Input: return KIFMM_ERR_INPUT;
    case ErrorKind::Parameter: return KIFMM_ERR_PARAMETER;
    case ErrorKind::Config: return KIFMM_ERR_CONFIG;
    case ErrorKind::Shape: return KIFMM_ERR_SHAPE;
    case ErrorKind::Numerical: return KIFMM_ERR_NUMERICAL;
    case ErrorKind::Io: return KIFMM_ERR_IO;
  }
  return KIFMM_ERR_INTERNAL;
}

template <class F>
kifmm_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return KIFMM_OK;
  } catch (const kifmm::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return KIFMM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return KIFMM_ERR_INTERNAL;
  }
}

kifmm_status null_arg(const char* what) {
  g_last_error = std::string(what) + " is NULL";
  return KIFMM_ERR_NULL;
}

std::vector<kifmm::Point3> unpack(const double* xyz, size_t n) {
  std::vector<kifmm::Point3> p(n);
  for (size_t i = 0; i < n; ++i) p[i] = {xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]};
  return p;
}

kifmm::FmmConfig translate(const kifmm_config& c) {
  kifmm::FmmConfig f;
  f.depth = c.depth;
  f.equivalent_order = c.equivalent_order;
  f.check_order = c.check_order;
  f.backend = c.backend == KIFMM_BACKEND_FFT ? kifmm::Backend::Fft : kifmm::Backend::Blas;
  f.sigma_min = c.sigma_min;
  f.oversamples = c.oversamples;
  f.rank_estimate = c.rank_estimate;
  f.alpha = c.alpha;
  f.block_size = c.block_size;
  f.n_rhs = c.n_rhs;
  f.strategy = c.strategy == KIFMM_STRATEGY_PARALLEL     ? kifmm::BucketStrategy::Parallel
               : c.strategy == KIFMM_STRATEGY_SEQUENTIAL ? kifmm::BucketStrategy::Sequential
                                                         : kifmm::BucketStrategy::Auto;
  f.seed = c.seed;
  f.deterministic_svd = c.deterministic_svd != 0;
  if (c.backend != KIFMM_BACKEND_BLAS && c.backend != KIFMM_BACKEND_FFT) {
    kifmm::fail(kifmm::ErrorKind::Config, "unknown M2L back end");
  }
  return f;
}

}  // namespace

struct kifmm_fmm {
  std::variant<Instance<float>, Instance<double>> impl;
  int n_rhs = 1;
};

struct kifmm_points {
  kifmm::PointCloud cloud;
  std::vector<double> xyz;
};

extern "C" {

void kifmm_config_default(kifmm_config* c) {
  if (!c) return;
  c->depth = 3;
  c->equivalent_order = 6;
  c->check_order = 6;
  c->backend = KIFMM_BACKEND_BLAS;
  c->precision = KIFMM_F64;
  c->sigma_min = 1e-6;
  c->oversamples = 5;
  c->rank_estimate = 0;
  c->alpha = 0.0;
  c->block_size = 32;
  c->n_rhs = 1;
  c->strategy = KIFMM_STRATEGY_AUTO;
  c->seed = 0;
  c->deterministic_svd = 0;
}

const char* kifmm_status_string(kifmm_status s) {
  switch (s) {
    case KIFMM_OK: return "ok";
    case KIFMM_ERR_DOMAIN: return "point outside domain";
    case KIFMM_ERR_INVALID_LEVEL: return "invalid level";
    case KIFMM_ERR_ADMISSIBILITY: return "pair not admissible";
    case KIFMM_ERR_INPUT: return "invalid input";
    case KIFMM_ERR_PARAMETER: return "invalid parameter";
    case KIFMM_ERR_CONFIG: return "invalid configuration";
    case KIFMM_ERR_SHAPE: return "shape mismatch";
    case KIFMM_ERR_NUMERICAL: return "numerical failure";
    case KIFMM_ERR_IO: return "I/O error";
    case KIFMM_ERR_NULL: return "null argument";
    case KIFMM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* kifmm_last_error(void) { return g_last_error.c_str(); }

void kifmm_set_threads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

kifmm_status kifmm_create(const double* sources, size_t n_sources, const double* targets, size_t n_targets,
                          const kifmm_config* config, kifmm_fmm** out) {
  if (!out) return null_arg("out");
  *out = nullptr;
  if (!config) return null_arg("config");
  if ((!sources && n_sources) || (!targets && n_targets)) return null_arg("point array");
  return guarded([&] {
    const auto cfg = translate(*config);
    const auto src = unpack(sources, n_sources);
    const auto tgt = unpack(targets, n_targets);
    auto h = std::make_unique<kifmm_fmm>();
    h->n_rhs = cfg.n_rhs;
    if (config->precision == KIFMM_F32) {
      Instance<float> inst;
      inst.fmm = std::make_unique<kifmm::Fmm<float>>(src, tgt, cfg);
      h->impl = std::move(inst);
    } else if (config->precision == KIFMM_F64) {
      Instance<double> inst;
      inst.fmm = std::make_unique<kifmm::Fmm<double>>(src, tgt, cfg);
      h->impl = std::move(inst);
    } else {
      kifmm::fail(kifmm::ErrorKind::Config, "precision must be KIFMM_F32 or KIFMM_F64");
    }
    *out = h.release();
  });
}

void kifmm_destroy(kifmm_fmm* fmm) { delete fmm; }

size_t kifmm_n_sources(const kifmm_fmm* fmm) {
  return fmm ? std::visit([](const auto& i) { return i.fmm->n_sources(); }, fmm->impl) : 0;
}

size_t kifmm_n_targets(const kifmm_fmm* fmm) {
  return fmm ? std::visit([](const auto& i) { return i.fmm->n_targets(); }, fmm->impl) : 0;
}

int kifmm_n_rhs(const kifmm_fmm* fmm) { return fmm ? fmm->n_rhs : 0; }

}  // extern "C"

namespace {

template <class In, class Out>
kifmm_status evaluate_any(kifmm_fmm* fmm, const In* charges, size_t n_charges, Out* potentials, size_t n_potentials) {
  if (!fmm) return null_arg("fmm");
  if (!charges && n_charges) return null_arg("charges");
  if (!potentials && n_potentials) return null_arg("potentials");
  return guarded([&] {
    std::visit(
        [&](auto& inst) {
          using Real = typename std::decay_t<decltype(inst.charges)>::value_type;
          const size_t nt = inst.fmm->n_targets() * static_cast<size_t>(fmm->n_rhs);
          if (n_potentials != nt) kifmm::fail(kifmm::ErrorKind::Shape, "potential buffer length mismatch");
          inst.evaluated = false;
          inst.charges.assign(charges, charges + n_charges);
          inst.potentials = inst.fmm->evaluate(std::span<const Real>(inst.charges));
          inst.evaluated = true;
          for (size_t i = 0; i < nt; ++i) potentials[i] = static_cast<Out>(inst.potentials[i]);
        },
        fmm->impl);
  });
}

}  // namespace

extern "C" {

kifmm_status kifmm_evaluate(kifmm_fmm* fmm, const double* charges, size_t n_charges, double* potentials,
                            size_t n_potentials) {
  return evaluate_any(fmm, charges, n_charges, potentials, n_potentials);
}

kifmm_status kifmm_evaluate_f32(kifmm_fmm* fmm, const float* charges, size_t n_charges, float* potentials,
                                size_t n_potentials) {
  return evaluate_any(fmm, charges, n_charges, potentials, n_potentials);
}

kifmm_status kifmm_relative_error(const kifmm_fmm* fmm, long leaf, kifmm_error_report* report, double* per_rhs) {
  if (!fmm) return null_arg("fmm");
  if (!report) return null_arg("report");
  return guarded([&] {
    std::visit(
        [&](const auto& inst) {
          if (!inst.evaluated) kifmm::fail(kifmm::ErrorKind::Input, "no evaluation to measure");
          std::optional<std::size_t> l;
          if (leaf >= 0) l = static_cast<std::size_t>(leaf);
          const auto r = inst.fmm->relative_error(inst.charges, inst.potentials, l);
          report->error = r.error;
          report->leaf = r.leaf;
          report->samples = r.samples;
          report->excluded = r.excluded;
          if (per_rhs) std::copy(r.per_rhs.begin(), r.per_rhs.end(), per_rhs);
        },
        fmm->impl);
  });
}

kifmm_status kifmm_get_timings(const kifmm_fmm* fmm, kifmm_timings* t) {
  if (!fmm) return null_arg("fmm");
  if (!t) return null_arg("timings");
  return guarded([&] {
    const kifmm::Timings s = std::visit([](const auto& i) { return i.fmm->timings(); }, fmm->impl);
    *t = {s.p2m, s.m2m, s.m2l, s.l2l, s.l2p, s.p2p, s.setup, s.evaluate};
  });
}

kifmm_status kifmm_get_counters(const kifmm_fmm* fmm, size_t* m2l_calls, size_t n_levels, size_t* p2p_pairs,
                                size_t* downward_slots) {
  if (!fmm) return null_arg("fmm");
  return guarded([&] {
    const kifmm::Counters c = std::visit([](const auto& i) { return i.fmm->counters(); }, fmm->impl);
    if (m2l_calls) {
      for (size_t l = 0; l < n_levels; ++l) m2l_calls[l] = l < c.m2l_calls.size() ? c.m2l_calls[l] : 0;
    }
    if (p2p_pairs) *p2p_pairs = c.p2p_pairs;
    if (downward_slots) *downward_slots = c.downward_slots;
  });
}

kifmm_status kifmm_direct(const double* sources, size_t n_sources, const double* charges, const double* targets,
                          size_t n_targets, int n_rhs, double* out) {
  if (!sources || !charges || !targets || !out) return null_arg("argument");
  return guarded([&] {
    if (n_rhs < 1) kifmm::fail(kifmm::ErrorKind::Shape, "n_rhs must be positive");
    const kifmm::PointSet<double> s(unpack(sources, n_sources));
    const kifmm::PointSet<double> t(unpack(targets, n_targets));
    const auto r = kifmm::laplace::direct_potentials<double>(
        s.view(), std::span<const double>(charges, n_sources * static_cast<size_t>(n_rhs)), t.view(), n_rhs);
    std::copy(r.begin(), r.end(), out);
  });
}

kifmm_status kifmm_generate_points(kifmm_distribution kind, size_t n, uint64_t seed, double* out) {
  if (!out && n) return null_arg("out");
  return guarded([&] {
    if (kind != KIFMM_UNIFORM_CUBE && kind != KIFMM_SPHERE_SURFACE) {
      kifmm::fail(kifmm::ErrorKind::Parameter, "unknown point distribution");
    }
    const auto p = kifmm::generate_points(
        kind == KIFMM_SPHERE_SURFACE ? kifmm::Distribution::SphereSurface : kifmm::Distribution::UniformCube, n,
        seed);
    for (size_t i = 0; i < n; ++i)
      for (size_t a = 0; a < 3; ++a) out[3 * i + a] = p[i][a];
  });
}

kifmm_status kifmm_random_charges(size_t n, uint64_t seed, double* out) {
  if (!out && n) return null_arg("out");
  return guarded([&] {
    const auto q = kifmm::random_charges(n, seed);
    std::copy(q.begin(), q.end(), out);
  });
}

kifmm_status kifmm_points_read(const char* path, kifmm_points** out) {
  if (!out) return null_arg("out");
  *out = nullptr;
  if (!path) return null_arg("path");
  return guarded([&] {
    auto h = std::make_unique<kifmm_points>();
    h->cloud = kifmm::read_point_file(path);
    h->xyz.resize(3 * h->cloud.points.size());
    for (size_t i = 0; i < h->cloud.points.size(); ++i)
      for (size_t a = 0; a < 3; ++a) h->xyz[3 * i + a] = h->cloud.points[i][a];
    *out = h.release();
  });
}

namespace {

kifmm::PointCloud pack(const double* xyz, size_t n, const double* charges) {
  kifmm::PointCloud c;
  c.points = unpack(xyz, n);
  if (charges) c.charges.assign(charges, charges + n);
  return c;
}

}  // namespace

kifmm_status kifmm_points_write(const char* path, const double* xyz, size_t n, const double* charges,
                                kifmm_precision precision) {
  if (!path) return null_arg("path");
  if (!xyz && n) return null_arg("xyz");
  return guarded([&] {
    auto c = pack(xyz, n, charges);
    c.precision = static_cast<int>(precision);
    kifmm::write_point_file(path, c);
  });
}

kifmm_status kifmm_points_write_csv(const char* path, const double* xyz, size_t n, const double* charges) {
  if (!path) return null_arg("path");
  if (!xyz && n) return null_arg("xyz");
  return guarded([&] { kifmm::write_point_csv(path, pack(xyz, n, charges)); });
}

size_t kifmm_points_count(const kifmm_points* p) { return p ? p->cloud.points.size() : 0; }

const double* kifmm_points_coordinates(const kifmm_points* p) { return p ? p->xyz.data() : nullptr; }

const double* kifmm_points_charges(const kifmm_points* p) {
  return p && !p->cloud.charges.empty() ? p->cloud.charges.data() : nullptr;
}

int kifmm_points_precision(const kifmm_points* p) { return p ? p->cloud.precision : 0; }

void kifmm_points_destroy(kifmm_points* p) { delete p; }

}  // extern "C"
