/* C API for the vbip library: variational Bayes solvers for linear inverse
 * problems on 1D function spaces, with a multi-frequency Helmholtz
 * inverse-source test problem.
 *
 * All functions return VBIP_OK (0) on success or a negative error code;
 * vbip_last_error() describes the most recent failure on the calling thread.
 * Handles are opaque and must be released with the matching *_free call. */

#ifndef VBIP_H
#define VBIP_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    VBIP_OK = 0,
    VBIP_ERR_ARGUMENT = -1, /* invalid argument or malformed config */
    VBIP_ERR_IO = -2,       /* file not found / unreadable / unwritable */
    VBIP_ERR_NUMERIC = -3,  /* numerical failure (singular solve, ...) */
    VBIP_ERR_INTERNAL = -4,
    VBIP_ERR_BUFFER = -5    /* output buffer too small; *needed holds the size */
};

/* Report status values (vbip_report_status). */
enum {
    VBIP_STATUS_CONVERGED = 0,
    VBIP_STATUS_NOT_CONVERGED = 2
};

typedef struct vbip_config vbip_config;
typedef struct vbip_report vbip_report;

const char* vbip_version(void);

/* Description of the most recent error on this thread; never NULL. */
const char* vbip_last_error(void);

/* ---- configuration ---- */

int vbip_config_from_file(const char* path, vbip_config** out);
int vbip_config_from_string(const char* json_text, vbip_config** out);
int vbip_config_from_preset(const char* name, vbip_config** out);

int vbip_config_set_seed(vbip_config* cfg, uint64_t seed);
int vbip_config_set_output_dir(vbip_config* cfg, const char* dir);
int vbip_config_set_model(vbip_config* cfg, const char* model);

/* Resolved config as JSON. Call with buf=NULL to query the required size. */
int vbip_config_to_json(const vbip_config* cfg, char* buf, size_t cap, size_t* needed);

void vbip_config_free(vbip_config* cfg);

/* ---- runs ---- */

/* Generate synthetic data only; report holds the data vectors. */
int vbip_generate_data(const vbip_config* cfg, vbip_report** out);

/* Full experiment: generate (or read) data, then invert with the config's model. */
int vbip_run_experiment(const vbip_config* cfg, vbip_report** out);

/* ---- reports ---- */

/* VBIP_STATUS_CONVERGED or VBIP_STATUS_NOT_CONVERGED. */
int vbip_report_status(const vbip_report* rep);

/* Named scalar from the report ("sigma_hat", "tau", "lambda", "rel_error",
 * "iterations", "n_data", "intrinsic_dim", "seed", "wall_seconds"). */
int vbip_report_scalar(const vbip_report* rep, const char* key, double* out);

/* Writes the report's CSV files, summary.txt and config_resolved.json. */
int vbip_report_write(const vbip_report* rep, const char* dir);

void vbip_report_free(vbip_report* rep);

/* ---- diagnostics ---- */

/* Runs the oracle cross-check suite. Returns VBIP_OK when every check passed,
 * VBIP_ERR_NUMERIC otherwise; the textual report goes into buf (NULL to size). */
int vbip_oracle_suite(char* buf, size_t cap, size_t* needed);

/* Newline-separated "name: description" list of built-in presets. */
int vbip_presets_list(char* buf, size_t cap, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif /* VBIP_H */
