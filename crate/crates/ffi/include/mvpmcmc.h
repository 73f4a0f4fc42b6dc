#ifndef MVPMCMC_H
#define MVPMCMC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define MVP_OK 0

#define MVP_ERR_CONFIG 2

#define MVP_ERR_NUMERIC 3

#define MVP_ERR_DEGENERACY 4

/**
 * Invalid handle / null pointer / panic across the boundary.
 */
#define MVP_ERR_USAGE 5

/**
 * Opaque observation-sequence handle.
 */
typedef struct MvpDataset MvpDataset;

/**
 * Opaque model handle.
 */
typedef struct MvpModel MvpModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *mvp_last_error_message(void);

/**
 * Build a registered model ("neuron3d", "ou-meanfield", "linear-gaussian").
 * `overrides_json` may be NULL or a JSON object with partial parameter
 * overrides.
 *
 * # Safety
 * `name` must be a valid NUL-terminated string; `overrides_json` NULL or the
 * same.
 */
struct MvpModel *mvp_model_new(const char *name, const char *overrides_json);

/**
 * # Safety
 * `model` must come from `mvp_model_new` and not already be freed.
 */
void mvp_model_free(struct MvpModel *model);

/**
 * Number of inferred parameters, or -1 on NULL.
 *
 * # Safety
 * `model` must be a live handle or NULL.
 */
int32_t mvp_model_param_dim(const struct MvpModel *model);

/**
 * Copy the name of parameter `index` into `buf` (NUL-terminated). Returns 0,
 * or an error code if the index is out of range or the buffer too small.
 *
 * # Safety
 * `model` must be a live handle; `buf` must point to `cap` writable bytes.
 */
int32_t mvp_model_param_name(const struct MvpModel *model, size_t index, char *buf, size_t cap);

/**
 * Copy the model's reference parameter values into `out` (length `cap`,
 * must be at least the parameter dimension).
 *
 * # Safety
 * `model` live handle; `out` points to `cap` writable doubles.
 */
int32_t mvp_model_reference_theta(const struct MvpModel *model, double *out, size_t cap);

/**
 * Simulate `horizon` observations from the model at parameters `theta`
 * (NULL = reference values), using a law cloud of `cloud` particles at
 * discretization level `sim_level`.
 *
 * # Safety
 * `model` live handle; `theta` NULL or `theta_len` readable doubles.
 */
struct MvpDataset *mvp_dataset_generate(const struct MvpModel *model,
                                        const double *theta,
                                        size_t theta_len,
                                        size_t horizon,
                                        uint32_t sim_level,
                                        size_t cloud,
                                        uint64_t seed);

/**
 * Load observations from a CSV whose first column is the time index.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
struct MvpDataset *mvp_dataset_from_csv(const char *path);

/**
 * # Safety
 * `dataset` must come from a dataset constructor and not already be freed.
 */
void mvp_dataset_free(struct MvpDataset *dataset);

/**
 * Number of observation times, or -1 on NULL.
 *
 * # Safety
 * `dataset` must be a live handle or NULL.
 */
int64_t mvp_dataset_len(const struct MvpDataset *dataset);

/**
 * Read observation coordinate `coord` at time index `t` (0-based).
 *
 * # Safety
 * `dataset` live handle; `out` writable.
 */
int32_t mvp_dataset_get(const struct MvpDataset *dataset, size_t t, size_t coord, double *out);

/**
 * Bootstrap particle-filter log-likelihood estimate at discretization level
 * `level` with a law cloud of `law_particles` and `filter_particles` filter
 * particles. Writes the estimate to `out`.
 *
 * # Safety
 * `model` and `dataset` live handles; `theta` NULL or `theta_len` readable
 * doubles; `out` writable.
 */
int32_t mvp_bootstrap_loglik(const struct MvpModel *model,
                             const struct MvpDataset *dataset,
                             const double *theta,
                             size_t theta_len,
                             uint32_t level,
                             size_t law_particles,
                             size_t filter_particles,
                             uint64_t seed,
                             double *out);

/**
 * Run a full experiment from a JSON configuration string, writing outputs to
 * `out_dir`. On success returns a malloc'd JSON summary string; free it with
 * `mvp_string_free`. Returns NULL on failure.
 *
 * # Safety
 * `config_json` and `out_dir` must be valid NUL-terminated strings.
 */
char *mvp_run_experiment_json(const char *config_json, const char *out_dir);

/**
 * Free a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not already be freed.
 */
void mvp_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVPMCMC_H */
