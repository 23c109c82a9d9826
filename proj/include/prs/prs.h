/* C interface to the stability certifier. Every call returns a prs_status;
 * on failure prs_last_error() describes the problem (per thread). Objects are
 * opaque and released with their matching _free function. */
#ifndef PRS_H
#define PRS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(PRS_BUILDING_LIBRARY)
#define PRS_API __attribute__((visibility("default")))
#else
#define PRS_API
#endif

typedef enum prs_status {
  PRS_OK = 0,
  PRS_E_PARSE = 1,
  PRS_E_INVALID_MODEL = 2,
  PRS_E_INVALID_ARGUMENT = 3,
  PRS_E_DIVERGED = 4,
  PRS_E_SINGULAR = 5,
  PRS_E_INFEASIBLE = 6,
  PRS_E_OVERDETERMINED = 7,
  PRS_E_EIGENSOLVE = 8,
  PRS_E_NOT_POSITIVE_DEFINITE = 9,
  PRS_E_NO_ANCHOR = 10,
  PRS_E_NO_DELTA = 11,
  PRS_E_IO = 12,
  PRS_E_INTERNAL = 13
} prs_status;

typedef enum prs_verdict {
  PRS_VERDICT_PRS = 0,
  PRS_VERDICT_NOT_CERTIFIED = 1,
  PRS_VERDICT_ABORTED_INFEASIBLE = 2
} prs_verdict;

typedef enum prs_beta_mode { PRS_BETA_PRACTICAL = 0, PRS_BETA_THEORETICAL = 1 } prs_beta_mode;

typedef enum prs_infeasible_policy { PRS_INFEASIBLE_ABORT = 0, PRS_INFEASIBLE_VIOLATE = 1 } prs_infeasible_policy;

typedef enum prs_termination {
  PRS_STOP_SIGMA = 0,
  PRS_STOP_P_CONVERGED = 1,
  PRS_STOP_MAX_SAMPLES = 2,
  PRS_STOP_ORACLE_FAILURE = 3
} prs_termination;

typedef struct prs_network prs_network;
typedef struct prs_subspace prs_subspace;
typedef struct prs_oracle prs_oracle;
typedef struct prs_run prs_run;

typedef struct prs_options {
  double delta;              /* 0.05 */
  int beta_mode;             /* prs_beta_mode, practical */
  double rkhs_norm;          /* theoretical mode, 1 */
  double gamma;              /* theoretical mode, 1 */
  size_t max_samples;        /* 200 */
  int grid_density;          /* 21 */
  size_t max_grid_points;    /* 10000 */
  int refine_iterations;     /* 30 */
  double tol_sigma;          /* 1e-3 */
  double tol_p;              /* 1e-4 */
  int patience;              /* 3 */
  uint64_t seed;             /* 0 */
  double signal_variance;    /* 1 */
  double length_scale;       /* 1, every dimension */
  double noise_sd;           /* 1e-8 */
  int infeasible_policy;     /* prs_infeasible_policy, abort */
} prs_options;

typedef struct prs_summary {
  int verdict;        /* prs_verdict */
  int termination;    /* prs_termination */
  double delta;
  double beta;
  double p_m;
  double max_sigma;
  double max_mean;
  size_t samples;
  size_t oracle_calls;
  int grid_density;
  size_t grid_points;
  double wall_ms;
  int has_search;     /* subspace search ran: alpha and anchor_lambda valid */
  double alpha;
  double anchor_lambda;
  int has_delta_prime;
  double delta_prime;
  int has_validation;
  size_t validation_points;
  size_t validation_unstable;
  size_t validation_above_bound;
  double validation_coverage;
  double validation_max_lambda;
} prs_summary;

/* Returns 0 on success and writes *out; any other value marks the point infeasible. */
typedef int (*prs_oracle_fn)(void* user, const double* x, size_t dim, double* out);

PRS_API void prs_options_init(prs_options* opts);
PRS_API const char* prs_last_error(void);
PRS_API const char* prs_status_name(prs_status status);
PRS_API const char* prs_verdict_name(int verdict);
PRS_API const char* prs_termination_name(int termination);

/* network */
PRS_API prs_status prs_network_load(const char* path, prs_network** out);
PRS_API prs_status prs_network_parse(const char* text, prs_network** out);
PRS_API prs_status prs_network_save(const prs_network* net, const char* path);
PRS_API void prs_network_free(prs_network* net);
PRS_API size_t prs_network_machine_count(const prs_network* net);
/* Fits the loads so the power flow reproduces the named base point. */
PRS_API prs_status prs_network_calibrate(const prs_network* net, const char* const* names, const double* values,
                                         size_t n, prs_network** out);
/* Evaluates one operating target. Arrays hold one entry per machine (cap entries at most). */
PRS_API prs_status prs_evaluate(const prs_network* net, const char* const* names, const double* values, size_t n,
                                double* pg, double* qg, double* vm, size_t cap, double* lambda_c);

/* subspace */
PRS_API prs_status prs_subspace_load(const char* path, prs_subspace** out);
PRS_API prs_status prs_subspace_parse(const char* text, prs_subspace** out);
PRS_API prs_status prs_subspace_create(size_t dim, const char* const* names, const double* lower,
                                       const double* upper, const double* base, prs_subspace** out);
PRS_API void prs_subspace_free(prs_subspace* box);
PRS_API size_t prs_subspace_dim(const prs_subspace* box);
PRS_API const char* prs_subspace_name(const prs_subspace* box, size_t i);
PRS_API prs_status prs_subspace_bounds(const prs_subspace* box, double* lower, double* upper);
PRS_API int prs_subspace_has_base(const prs_subspace* box);
/* Keeps dims d1 and d2 free and fixes every other dimension at the base point. */
PRS_API prs_status prs_subspace_restrict(const prs_subspace* box, const char* d1, const char* d2, prs_subspace** out);

/* oracle */
PRS_API prs_status prs_oracle_from_network(const prs_network* net, const prs_subspace* box, prs_oracle** out);
PRS_API prs_status prs_oracle_from_callback(prs_oracle_fn fn, void* user, prs_oracle** out);
PRS_API void prs_oracle_free(prs_oracle* oracle);

/* runs */
PRS_API prs_status prs_certify(const prs_oracle* oracle, const prs_subspace* box, const prs_options* opts,
                               prs_run** out);
PRS_API prs_status prs_search_subspace(const prs_oracle* oracle, const prs_subspace* box, const prs_options* opts,
                                       prs_run** out);
/* Relaxes delta on the run's final model. PRS_E_NO_DELTA leaves the run unchanged. */
PRS_API prs_status prs_run_search_confidence(prs_run* run, const prs_options* opts);
/* Monte-Carlo check of a PRS run; the report is attached to the run. */
PRS_API prs_status prs_run_validate(prs_run* run, const prs_oracle* oracle, size_t n, uint64_t seed);
PRS_API void prs_run_free(prs_run* run);

PRS_API prs_status prs_run_summary(const prs_run* run, prs_summary* out);
PRS_API size_t prs_run_dim(const prs_run* run);
/* Bounds of the certified box (after any subspace search) and the maximizer of the bound. */
PRS_API prs_status prs_run_box(const prs_run* run, double* lower, double* upper, double* argmax);
PRS_API prs_status prs_run_posterior(const prs_run* run, const double* x, double* mean, double* variance);

PRS_API prs_status prs_run_write_certificate(const prs_run* run, const char* path, int timing);
PRS_API prs_status prs_run_write_history(const prs_run* run, const char* path, int timing);
PRS_API prs_status prs_run_write_box_table(const prs_run* run, const char* path);
PRS_API prs_status prs_run_write_subspace(const prs_run* run, const char* path);
PRS_API prs_status prs_run_write_gp(const prs_run* run, const char* path);
/* density x density grid over a run on a box with two free dimensions; truth may be NULL. */
PRS_API prs_status prs_run_write_surface(const prs_run* run, const prs_oracle* truth, int density, const char* path);

#ifdef __cplusplus
}
#endif

#endif
