/*
 * excomp - external comparator group construction
 *
 * C interface to the estimation library: load a two-source dataset, run the
 * transportability estimators with bootstrap or influence-function
 * inference, run the simulation harness, and run the shared-arm
 * falsification diagnostic.
 *
 * All functions return an excomp_status; on failure excomp_last_error()
 * holds a message for the calling thread. Strings returned through out
 * parameters are owned by the caller and released with excomp_free_string().
 * Result documents are JSON; option arguments are JSON objects described in
 * the project README.
 */

#ifndef EXCOMP_H
#define EXCOMP_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef int excomp_status;

/* status values double as CLI exit codes */
#define EXCOMP_OK 0
#define EXCOMP_ERR_INTERNAL 1
#define EXCOMP_ERR_CONFIG 2
#define EXCOMP_ERR_DATA 3
#define EXCOMP_ERR_ESTIMATION 4
#define EXCOMP_ERR_SCENARIO 5

/* opaque dataset handle */
typedef struct excomp_dataset excomp_dataset;

const char* excomp_version(void);

/* message describing the calling thread's most recent failure */
const char* excomp_last_error(void);

void excomp_free_string(char* s);

/*
 * Load a CSV into a dataset handle. options_json:
 *   {
 *     "coding": {"index_arms": [...], "external_arms": [...],
 *                "index_only": int, "external_only": int, "shared": int?},
 *     "covariates": ["x1", ...],
 *     "drop_incomplete": bool?
 *   }
 */
excomp_status excomp_dataset_load_csv(const char* csv_path, const char* options_json,
                                      excomp_dataset** out);

void excomp_dataset_free(excomp_dataset* ds);

excomp_status excomp_dataset_counts(const excomp_dataset* ds, int64_t* rows, int64_t* n_index,
                                    int64_t* n_external);

/*
 * Estimation on a dataset handle. options_json mirrors the estimate config
 * file keys: models, estimands, methods, scale, inference, bootstrap
 * settings, truncation, known_e. Returns the result document.
 */
excomp_status excomp_estimate(const excomp_dataset* ds, const char* options_json,
                              char** result_json);

excomp_status excomp_diagnose(const excomp_dataset* ds, const char* options_json,
                              char** result_json);

/*
 * Command runners used by the CLI: read a config file, apply overrides, and
 * return the result document. overrides_json keys: data, seed, iterations,
 * full, drop_incomplete, known_e, truncate, threads (all optional).
 * excomp_run_simulate accepts a null config_path when overrides request the
 * built-in full grid.
 */
excomp_status excomp_run_estimate(const char* config_path, const char* overrides_json,
                                  char** result_json);
excomp_status excomp_run_diagnose(const char* config_path, const char* overrides_json,
                                  char** result_json);
excomp_status excomp_run_simulate(const char* config_path, const char* overrides_json,
                                  char** result_json);

#ifdef __cplusplus
}
#endif

#endif /* EXCOMP_H */
