#ifndef KIFMM_KIFMM_H
#define KIFMM_KIFMM_H

#include <stddef.h>
#include <stdint.h>

#if defined(KIFMM_BUILDING)
#define KIFMM_API __attribute__((visibility("default")))
#else
#define KIFMM_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum kifmm_status {
  KIFMM_OK = 0,
  KIFMM_ERR_DOMAIN = 1,
  KIFMM_ERR_INVALID_LEVEL = 2,
  KIFMM_ERR_ADMISSIBILITY = 3,
  KIFMM_ERR_INPUT = 4,
  KIFMM_ERR_PARAMETER = 5,
  KIFMM_ERR_CONFIG = 6,
  KIFMM_ERR_SHAPE = 7,
  KIFMM_ERR_NUMERICAL = 8,
  KIFMM_ERR_IO = 9,
  KIFMM_ERR_NULL = 10,
  KIFMM_ERR_INTERNAL = 11
} kifmm_status;

typedef enum kifmm_backend { KIFMM_BACKEND_BLAS = 0, KIFMM_BACKEND_FFT = 1 } kifmm_backend;

/* Bytes per value. */
typedef enum kifmm_precision { KIFMM_F32 = 4, KIFMM_F64 = 8 } kifmm_precision;

typedef enum kifmm_strategy {
  KIFMM_STRATEGY_AUTO = 0,
  KIFMM_STRATEGY_SEQUENTIAL = 1,
  KIFMM_STRATEGY_PARALLEL = 2
} kifmm_strategy;

typedef enum kifmm_distribution { KIFMM_UNIFORM_CUBE = 0, KIFMM_SPHERE_SURFACE = 1 } kifmm_distribution;

typedef struct kifmm_config {
  int depth;
  int equivalent_order;
  int check_order;
  kifmm_backend backend;
  kifmm_precision precision;
  double sigma_min;
  int oversamples;
  int rank_estimate; /* 0: half the equivalent surface size */
  double alpha;
  int block_size;
  int n_rhs;
  kifmm_strategy strategy;
  uint64_t seed;
  int deterministic_svd;
} kifmm_config;

typedef struct kifmm_timings {
  double p2m, m2m, m2l, l2l, l2p, p2p;
  double setup;
  double evaluate;
} kifmm_timings;

typedef struct kifmm_error_report {
  double error; /* max over right-hand sides */
  size_t leaf;
  size_t samples;
  size_t excluded;
} kifmm_error_report;

typedef struct kifmm_fmm kifmm_fmm;
typedef struct kifmm_points kifmm_points;

/* Depth 3, orders 6/6, BLAS, double, sigma_min 1e-6, 5 oversamples, one rhs. */
KIFMM_API void kifmm_config_default(kifmm_config* config);

KIFMM_API const char* kifmm_status_string(kifmm_status status);
/* Message of the last failed call on this thread; empty when none. */
KIFMM_API const char* kifmm_last_error(void);

KIFMM_API void kifmm_set_threads(int n_threads);

/* Coordinates are interleaved x, y, z. Sources and targets may alias. */
KIFMM_API kifmm_status kifmm_create(const double* sources, size_t n_sources, const double* targets, size_t n_targets,
                          const kifmm_config* config, kifmm_fmm** out);
KIFMM_API void kifmm_destroy(kifmm_fmm* fmm);

KIFMM_API size_t kifmm_n_sources(const kifmm_fmm* fmm);
KIFMM_API size_t kifmm_n_targets(const kifmm_fmm* fmm);
KIFMM_API int kifmm_n_rhs(const kifmm_fmm* fmm);

/* charges: n_sources * n_rhs, potentials: n_targets * n_rhs, rhs-major, input
 * point order. Values are converted to the instance precision. */
KIFMM_API kifmm_status kifmm_evaluate(kifmm_fmm* fmm, const double* charges, size_t n_charges, double* potentials,
                            size_t n_potentials);
KIFMM_API kifmm_status kifmm_evaluate_f32(kifmm_fmm* fmm, const float* charges, size_t n_charges, float* potentials,
                                size_t n_potentials);

/* Error of the last evaluation; leaf < 0 selects the most populated target leaf.
 * per_rhs may be NULL, otherwise it receives n_rhs values. */
KIFMM_API kifmm_status kifmm_relative_error(const kifmm_fmm* fmm, long leaf, kifmm_error_report* report, double* per_rhs);

KIFMM_API kifmm_status kifmm_get_timings(const kifmm_fmm* fmm, kifmm_timings* timings);
/* m2l_calls receives n_levels entries, level l at index l; levels past depth read 0. */
KIFMM_API kifmm_status kifmm_get_counters(const kifmm_fmm* fmm, size_t* m2l_calls, size_t n_levels, size_t* p2p_pairs,
                                size_t* downward_slots);

/* Direct double-precision sum; charges n_sources * n_rhs, out n_targets * n_rhs. */
KIFMM_API kifmm_status kifmm_direct(const double* sources, size_t n_sources, const double* charges, const double* targets,
                          size_t n_targets, int n_rhs, double* out);

KIFMM_API kifmm_status kifmm_generate_points(kifmm_distribution kind, size_t n, uint64_t seed, double* out);
KIFMM_API kifmm_status kifmm_random_charges(size_t n, uint64_t seed, double* out);

/* Point files: binary "KIFM" format or CSV x,y,z[,q]. */
KIFMM_API kifmm_status kifmm_points_read(const char* path, kifmm_points** out);
KIFMM_API kifmm_status kifmm_points_write(const char* path, const double* xyz, size_t n, const double* charges,
                                kifmm_precision precision);
KIFMM_API kifmm_status kifmm_points_write_csv(const char* path, const double* xyz, size_t n, const double* charges);
KIFMM_API size_t kifmm_points_count(const kifmm_points* points);
/* Borrowed views valid until kifmm_points_destroy; charges is NULL when absent. */
KIFMM_API const double* kifmm_points_coordinates(const kifmm_points* points);
KIFMM_API const double* kifmm_points_charges(const kifmm_points* points);
KIFMM_API int kifmm_points_precision(const kifmm_points* points);
KIFMM_API void kifmm_points_destroy(kifmm_points* points);

#ifdef __cplusplus
}
#endif

#endif
