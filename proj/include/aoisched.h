/* C interface of the age-of-information scheduling library.
 *
 * All functions returning aoi_status leave their outputs untouched on
 * failure; aoi_last_error() then holds a thread-local message valid until
 * the next failing call on the same thread. Handles are destroyed with the
 * matching *_destroy function; destroy functions accept NULL.
 */
#ifndef AOISCHED_H
#define AOISCHED_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum aoi_status {
  AOI_OK = 0,
  AOI_ERR_INVALID_ARGUMENT = 1,
  AOI_ERR_RUNTIME = 2,
  AOI_ERR_CHECK_FAILED = 3
} aoi_status;

const char* aoi_version(void);
const char* aoi_rng_algorithm(void);
const char* aoi_last_error(void);

/* --- closed forms ------------------------------------------------------ */

aoi_status aoi_whittle_index(double p, int64_t age, double* out);
aoi_status aoi_active_fraction(double p, int64_t threshold, double* out);
aoi_status aoi_threshold_average_cost(double p, int64_t threshold, double lambda, double* out);
/* Fills probs[0..max_state-1] with the stationary distribution of the
 * threshold chain and stores the analytic remainder in *tail_mass. */
aoi_status aoi_stationary_distribution(double p, int64_t threshold, int64_t max_state,
                                       double* probs, double* tail_mass);
aoi_status aoi_compute_d(double p_hi, double p_lo, double* out);
aoi_status aoi_assumption_bound(double p_hi, double p_lo, double* out);
aoi_status aoi_t_max(double alpha, double p_lo, int64_t* out);

/* --- system + relaxed solution handles --------------------------------- */

typedef struct aoi_system aoi_system;
/* k class probabilities (nonincreasing) and shares summing to 1. */
aoi_status aoi_system_create(const double* p, const double* share, size_t k, double alpha,
                             aoi_system** out);
void aoi_system_destroy(aoi_system* system);

typedef struct aoi_relaxed aoi_relaxed;
aoi_status aoi_relaxed_solve(const aoi_system* system, aoi_relaxed** out);
void aoi_relaxed_destroy(aoi_relaxed* solution);
double aoi_relaxed_w_star(const aoi_relaxed* solution);
double aoi_relaxed_theta(const aoi_relaxed* solution);
double aoi_relaxed_cost(const aoi_relaxed* solution);
/* Copies up to cap per-class thresholds; *out_k gets the class count. */
aoi_status aoi_relaxed_thresholds(const aoi_relaxed* solution, int64_t* l1, int64_t* l2,
                                  size_t cap, size_t* out_k);
/* Serialized solution; the string is owned by the handle. */
const char* aoi_relaxed_to_json(const aoi_relaxed* solution);

/* --- experiments -------------------------------------------------------- */

typedef struct aoi_experiment aoi_experiment;

typedef struct aoi_run_options {
  const char* out_dir;  /* NULL: current directory */
  int has_seed;
  uint64_t seed;        /* overrides the spec's base seed when has_seed */
  int no_timestamp;     /* non-zero: byte-identical reruns */
  int threads;          /* 0: one worker per hardware thread */
  int check;            /* non-zero: evaluate the built-in result checks */
} aoi_run_options;

aoi_status aoi_experiment_create_from_file(const char* path, aoi_experiment** out);
aoi_status aoi_experiment_create_from_json(const char* json_text, aoi_experiment** out);
/* Experiment kind ("balpha_table", "relaxed_solve", "fluid_run", "sim_sweep",
 * "kurtz"); owned by the handle. */
const char* aoi_experiment_kind(const aoi_experiment* experiment);
/* Runs the experiment and writes its output files. Returns
 * AOI_ERR_CHECK_FAILED when checks were requested and failed; the summary is
 * still available in that case. */
aoi_status aoi_experiment_run(aoi_experiment* experiment, const aoi_run_options* options);
/* Summary of the last run as pretty-printed JSON, owned by the handle;
 * NULL before the first run. */
const char* aoi_experiment_summary_json(const aoi_experiment* experiment);
void aoi_experiment_destroy(aoi_experiment* experiment);

#ifdef __cplusplus
}
#endif

#endif /* AOISCHED_H */
