#ifndef LGVLAB_H
#define LGVLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LGV_API __declspec(dllexport)
#else
#define LGV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every function returning int returns one of these; on failure the message
   is available from lgv_last_error() on the calling thread until its next failing call. */
enum {
  LGV_OK = 0,
  LGV_INVALID_ARGUMENT = 1,
  LGV_NON_CONFINING = 2,
  LGV_SINGULAR_SIGMA = 3,
  LGV_MISSING_HESSIAN = 4,
  LGV_BLOW_UP = 5,
  LGV_NOISE_STREAM_MISMATCH = 6,
  LGV_ENVELOPE_REJECTION_STALL = 7,
  LGV_GRID_TOO_COARSE = 8,
  LGV_LINEAR_SOLVE_FAILURE = 9,
  LGV_NON_CONVERGENCE = 10,
  LGV_WINDOW_TOO_SHORT = 11,
  LGV_SE_OVERFLOW = 12,
  LGV_NOT_STATIONARY = 13,
  LGV_NON_GRADIENT_PERTURBATION = 14,
  LGV_NON_DECAYING_TAIL = 15,
  LGV_INSUFFICIENT_SAMPLES = 16,
  LGV_CONFIG_INVALID = 17,
  LGV_IO_FAILURE = 18,
  LGV_INTERNAL = 99
};

typedef struct lgv_config lgv_config;
typedef struct lgv_result lgv_result;
typedef struct lgv_ensemble lgv_ensemble;

LGV_API const char* lgv_version(void);
LGV_API const char* lgv_last_error(void);
LGV_API const char* lgv_status_name(int status);

/* 0 restores the default: LGVLAB_THREADS if set, else hardware concurrency. */
LGV_API int lgv_set_threads(int n);

/* Experiment configuration (JSON document; unknown keys are rejected). */
LGV_API int lgv_config_load(const char* path, lgv_config** out);
LGV_API int lgv_config_parse(const char* json_text, lgv_config** out);
LGV_API int lgv_config_set_seed(lgv_config* cfg, uint64_t seed);
LGV_API int lgv_config_set_output_dir(lgv_config* cfg, const char* dir);
LGV_API int lgv_config_output_dir(const lgv_config* cfg, const char** dir);
LGV_API void lgv_config_free(lgv_config* cfg);

/* Runs the configured experiment. The result remembers the config's output section. */
LGV_API int lgv_run(const lgv_config* cfg, lgv_result** out);
LGV_API int lgv_result_passed(const lgv_result* r, int* passed);
LGV_API int lgv_result_verdict_count(const lgv_result* r, size_t* n);
/* Strings returned through out-parameters are owned by the result. */
LGV_API int lgv_result_verdict(const lgv_result* r, size_t i, const char** name, double* lhs, double* rhs,
                               double* tolerance, int* pass);
LGV_API int lgv_result_report_json(const lgv_result* r, const char** json);
/* Writes CSV, plot data and report.json; *n_files receives the number of files written. */
LGV_API int lgv_result_emit(const lgv_result* r, size_t* n_files);
LGV_API void lgv_result_free(lgv_result* r);

/* Trajectories for the config's model and numerics. States are [path][record][component]. */
LGV_API int lgv_simulate(const lgv_config* cfg, lgv_ensemble** out);
LGV_API int lgv_ensemble_shape(const lgv_ensemble* e, int64_t* n_paths, int64_t* n_records, int* state_dim);
LGV_API int lgv_ensemble_times(const lgv_ensemble* e, const double** times);
LGV_API int lgv_ensemble_states(const lgv_ensemble* e, const double** states);
LGV_API void lgv_ensemble_free(lgv_ensemble* e);

#ifdef __cplusplus
}
#endif

#endif
