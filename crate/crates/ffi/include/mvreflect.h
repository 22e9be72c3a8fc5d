#ifndef MVREFLECT_H
#define MVREFLECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes. Library errors keep the numeric codes of the CLI.
 */
typedef enum MvrStatus {
  MVR_STATUS_OK = 0,
  MVR_STATUS_INVALID_ARGUMENT = 2,
  MVR_STATUS_SHAPE = 3,
  MVR_STATUS_DOMAIN_RANGE = 4,
  MVR_STATUS_GEOMETRY_SEARCH = 5,
  MVR_STATUS_PROJECTION_FAILURE = 6,
  MVR_STATUS_FIXED_POINT = 7,
  MVR_STATUS_OPTIMIZATION = 8,
  MVR_STATUS_UNKNOWN_PRESET = 10,
  MVR_STATUS_CONFIG = 11,
  MVR_STATUS_IO = 12,
  MVR_STATUS_MISSING_TABLE = 13,
  MVR_STATUS_NULL_POINTER = 20,
  MVR_STATUS_UTF8 = 21,
  MVR_STATUS_BUFFER_TOO_SMALL = 22,
  MVR_STATUS_PANIC = 99,
} MvrStatus;

/**
 * Simulated particle paths.
 */
typedef struct MvrEnsemble MvrEnsemble;

/**
 * A model with its grid and initial law, built from an experiment config.
 */
typedef struct MvrModel MvrModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t mvr_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mvr_version(void);

/**
 * Builds a model from TOML config text. Only the domain, field,
 * coefficient, grid and init sections matter here.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string; `out_model` must be valid.
 */
enum MvrStatus mvr_model_from_config(const char *config_toml, struct MvrModel **out_model);

/**
 * # Safety
 * `model` must be null or a handle from [`mvr_model_from_config`] not yet freed.
 */
void mvr_model_free(struct MvrModel *model);

/**
 * State dimension and number of grid nodes.
 *
 * # Safety
 * `model` must be a live handle; the out pointers must be valid.
 */
enum MvrStatus mvr_model_shape(const struct MvrModel *model, size_t *out_dim, size_t *out_nodes);

/**
 * Simulates `n` interacting particles with noise scale `noise_scale`,
 * drawing everything from `seed`.
 *
 * # Safety
 * `model` must be a live handle; `out_ensemble` must be valid.
 */
enum MvrStatus mvr_simulate(const struct MvrModel *model,
                            size_t n,
                            uint64_t seed,
                            double noise_scale,
                            struct MvrEnsemble **out_ensemble);

/**
 * # Safety
 * `ensemble` must be null or a handle from [`mvr_simulate`] not yet freed.
 */
void mvr_ensemble_free(struct MvrEnsemble *ensemble);

/**
 * Particle count.
 *
 * # Safety
 * `ensemble` must be a live handle; `out_n` must be valid.
 */
enum MvrStatus mvr_ensemble_len(const struct MvrEnsemble *ensemble, size_t *out_n);

/**
 * Copies the path of `particle` (row-major, nodes × dim) into `buf`, which
 * must hold at least `nodes · dim` values.
 *
 * # Safety
 * `ensemble` must be a live handle; `buf` must be valid for `len` doubles.
 */
enum MvrStatus mvr_ensemble_path(const struct MvrEnsemble *ensemble,
                                 size_t particle,
                                 double *buf,
                                 size_t len);

/**
 * `W₂` between two uniform empirical measures on `R^dim` given as
 * row-major point arrays.
 *
 * # Safety
 * `x` and `y` must be valid for `nx · dim` and `ny · dim` doubles.
 */
enum MvrStatus mvr_w2_uniform(const double *x,
                              size_t nx,
                              const double *y,
                              size_t ny,
                              size_t dim,
                              double *out_distance);

/**
 * `½ Σ ‖h_k‖² dt` for a control with `n_steps × m` values on a uniform grid
 * over `[0, horizon]`.
 *
 * # Safety
 * `values` must be valid for `n_steps · m` doubles.
 */
enum MvrStatus mvr_rate_functional(const double *values,
                                   size_t n_steps,
                                   size_t m,
                                   double horizon,
                                   double *out_rate);

/**
 * Runs the experiment named in `config_toml`, writing into `out_dir`.
 * `out_passed` receives 1 if every invariant check passed, else 0.
 *
 * # Safety
 * Both strings must be NUL-terminated; `out_passed` must be valid.
 */
enum MvrStatus mvr_run_experiment(const char *config_toml,
                                  const char *out_dir,
                                  int32_t *out_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MVREFLECT_H */
