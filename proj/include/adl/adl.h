/* SPDX-License-Identifier: Apache-2.0 */
/*
 * C interface to the accumulated decoupled learning simulator.
 *
 * Objects are opaque handles created by *_load / *_parse / *_run / *_read
 * functions and released with the matching *_free. Every fallible call
 * returns an adl_status; on failure adl_last_error() describes the problem
 * (the message is thread-local and valid until the next call on the same
 * thread).
 */
#ifndef ADL_ADL_H
#define ADL_ADL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ADL_BUILDING_LIBRARY)
#    define ADL_API __declspec(dllexport)
#  else
#    define ADL_API __declspec(dllimport)
#  endif
#else
#  define ADL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 0, 2 and 3 double as CLI exit codes. */
typedef enum adl_status {
  ADL_OK = 0,
  ADL_ERR_INTERNAL = 1,
  ADL_ERR_CONFIG = 2,
  ADL_ERR_DIVERGED = 3,
  ADL_ERR_DOMAIN = 4,
  ADL_ERR_PARSE = 5,
  ADL_ERR_PROTOCOL = 6,
  ADL_ERR_DIMENSION = 7,
  ADL_ERR_COMPARISON = 8,
  ADL_ERR_INVALID_ARGUMENT = 9
} adl_status;

typedef struct adl_experiment adl_experiment;
typedef struct adl_trace adl_trace;

ADL_API const char* adl_version(void);
ADL_API const char* adl_last_error(void);
ADL_API const char* adl_status_name(adl_status status);

/* ---- experiments ------------------------------------------------------ */

ADL_API adl_status adl_experiment_load(const char* path, adl_experiment** out);
ADL_API adl_status adl_experiment_parse(const char* text, adl_experiment** out);
ADL_API void adl_experiment_free(adl_experiment* experiment);

/* Empty string when the config has no run.out_path. */
ADL_API const char* adl_experiment_out_path(const adl_experiment* experiment);
ADL_API adl_status adl_experiment_set_out_path(adl_experiment* experiment,
                                               const char* path);

/* Builds the dataset and runs the configured mode. On divergence the partial
 * trace is still returned through *out and the status is ADL_ERR_DIVERGED. */
ADL_API adl_status adl_experiment_run(const adl_experiment* experiment,
                                      adl_trace** out);

/* Writes trace.csv and summary.txt (ticks.csv at tick level) into dir. */
ADL_API adl_status adl_experiment_write_outputs(const adl_experiment* experiment,
                                                const adl_trace* trace,
                                                const char* dir);

/* ---- traces ----------------------------------------------------------- */

ADL_API void adl_trace_free(adl_trace* trace);
ADL_API adl_status adl_trace_read_csv(const char* path, adl_trace** out);
ADL_API adl_status adl_trace_write_csv(const adl_trace* trace, const char* path);
ADL_API int64_t adl_trace_update_count(const adl_trace* trace);
ADL_API int64_t adl_trace_modules(const adl_trace* trace);
ADL_API int64_t adl_trace_accumulation_steps(const adl_trace* trace);
ADL_API int adl_trace_diverged(const adl_trace* trace);
ADL_API double adl_trace_wall_seconds(const adl_trace* trace);
ADL_API adl_status adl_trace_update(const adl_trace* trace, int64_t s,
                                    double* loss, double* grad_norm);

/* Provenance of slot j of module k (1-based) in update s. */
ADL_API adl_status adl_trace_slot(const adl_trace* trace, int64_t s, int64_t k,
                                  int64_t j, int64_t* batch_index,
                                  int64_t* version_used, int64_t* staleness);

typedef struct adl_compare_report {
  int pass;
  int has_divergence;
  int64_t first_divergence;
  double max_loss_diff;
  double max_grad_norm_diff;
  double max_param_diff;
  char detail[256];
} adl_compare_report;

ADL_API adl_status adl_compare_traces(const adl_trace* a, const adl_trace* b,
                                      double tol, adl_compare_report* out);

/* ---- staleness -------------------------------------------------------- */

ADL_API adl_status adl_level_of_staleness(int64_t t, int64_t d, int64_t M,
                                          int64_t* out);
ADL_API adl_status adl_module_staleness(int64_t s, int64_t j, int64_t K,
                                        int64_t k, int64_t M, int64_t* out);
ADL_API adl_status adl_effective_version(int64_t s, int64_t j, int64_t K,
                                         int64_t k, int64_t M, int64_t* out);
/* Exact reduced fraction num/den. */
ADL_API adl_status adl_averaged_los(int64_t K, int64_t k, int64_t M,
                                    int64_t* num, int64_t* den);
ADL_API adl_status adl_total_averaged_los(int64_t K, int64_t M, int64_t* num,
                                          int64_t* den);

/* ---- convergence bounds ---------------------------------------------- */

typedef struct adl_bound_inputs {
  double gamma;
  double grad_norm_sq;
  double A;
  double L;
  int64_t M;
  double sum_dbar;
  int64_t S;
  double gap;
  double epsilon;
} adl_bound_inputs;

ADL_API adl_status adl_theorem1_rhs(const adl_bound_inputs* in, double* out);
ADL_API adl_status adl_theorem2_rhs(const adl_bound_inputs* in,
                                    const double* schedule, size_t length,
                                    double* out);
ADL_API adl_status adl_theorem3_lr(const adl_bound_inputs* in, double* gamma,
                                   int* admissible);
ADL_API adl_status adl_theorem3_bound(const adl_bound_inputs* in, double* out);

#ifdef __cplusplus
}
#endif

#endif /* ADL_ADL_H */
