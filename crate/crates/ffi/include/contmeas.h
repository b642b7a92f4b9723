#ifndef CONTMEAS_H
#define CONTMEAS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum CmStatus {
  CM_STATUS_OK = 0,
  CM_STATUS_INVALID_ARGUMENT = 1,
  CM_STATUS_CONFIG = 2,
  CM_STATUS_VALIDATION = 3,
  CM_STATUS_INTEGRATION = 4,
  CM_STATUS_INVERSION = 5,
  CM_STATUS_PANIC = 6,
} CmStatus;

/**
 * Opaque evolution result.
 */
typedef struct CmEvolution CmEvolution;

/**
 * Opaque model handle.
 */
typedef struct CmModel CmModel;

/**
 * Opaque parsed run configuration.
 */
typedef struct CmRun CmRun;

/**
 * Degenerate parametric oscillator parameters with equal splitting of the
 * decay channels.
 */
typedef struct CmDpoParams {
  double omega_c;
  double g;
  double kappa;
  double nbar;
  double kappa_p;
  double nbar_p;
  double theta3;
  double lambda_re;
  double lambda_im;
} CmDpoParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. Empty after a
 * successful call. Valid until the next call on the same thread.
 */
const char *cm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cm_version(void);

/**
 * Build the oscillator model on the `(n_max, m_max)` truncation.
 *
 * # Safety
 * `params` must point to a valid `CmDpoParams`; `out` must be writable.
 */
enum CmStatus cm_dpo_model_new(const struct CmDpoParams *params,
                               size_t n_max,
                               size_t m_max,
                               struct CmModel **out);

/**
 * # Safety
 * `model` must come from [`cm_dpo_model_new`] and not be used afterwards.
 */
void cm_model_free(struct CmModel *model);

/**
 * Hilbert-space dimension of the truncation, 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t cm_model_dim(const struct CmModel *model);

/**
 * Largest dissipativity residual on the interior of the truncation.
 *
 * # Safety
 * `model` must be a live handle; `max_residual` must be writable.
 */
enum CmStatus cm_model_check_dissipativity(const struct CmModel *model,
                                           size_t guard_width,
                                           uint64_t seed,
                                           double *max_residual);

/**
 * Parse a TOML run configuration.
 *
 * # Safety
 * `toml` must be a NUL-terminated UTF-8 string; `out` must be writable.
 */
enum CmStatus cm_run_from_toml(const char *toml, struct CmRun **out);

/**
 * # Safety
 * `run` must come from [`cm_run_from_toml`] and not be used afterwards.
 */
void cm_run_free(struct CmRun *run);

/**
 * Evolve with the configured test function and store `Phi(t)` at the
 * configured stride.
 *
 * # Safety
 * `run` must be a live handle; `out` must be writable.
 */
enum CmStatus cm_run_evolve(const struct CmRun *run, struct CmEvolution **out);

/**
 * Number of stored time points, 0 for a null handle.
 *
 * # Safety
 * `ev` must be null or a live handle.
 */
size_t cm_evolution_len(const struct CmEvolution *ev);

/**
 * Copy the stored times into `out[0..len]`; `len` must equal
 * [`cm_evolution_len`].
 *
 * # Safety
 * `ev` must be a live handle; `out` must hold `len` doubles.
 */
enum CmStatus cm_evolution_times(const struct CmEvolution *ev, double *out, size_t len);

/**
 * Copy `Phi` at the stored times into `re[0..len]` and `im[0..len]`.
 *
 * # Safety
 * `ev` must be a live handle; `re` and `im` must hold `len` doubles.
 */
enum CmStatus cm_evolution_phi(const struct CmEvolution *ev, double *re, double *im, size_t len);

/**
 * # Safety
 * `ev` must come from [`cm_run_evolve`] and not be used afterwards.
 */
void cm_evolution_free(struct CmEvolution *ev);

/**
 * Joint characteristic function on the configured `[grid]`, row-major over
 * the increments. `*needed` receives the number of grid points; if `len` is
 * smaller, nothing is computed and `CM_STATUS_INVALID_ARGUMENT` is returned.
 *
 * # Safety
 * `run` must be a live handle; `re`, `im` must hold `len` doubles (or be
 * null with `len == 0`); `needed` must be writable.
 */
enum CmStatus cm_run_charfunc(const struct CmRun *run,
                              double *re,
                              double *im,
                              size_t len,
                              size_t *needed);

/**
 * Count probabilities `p(0..=n_max)` from `n` samples of a counting
 * characteristic function on the grid `2 pi j / n`.
 *
 * # Safety
 * `re`, `im` must hold `n` doubles; `probs` must hold `n_max + 1` doubles.
 */
enum CmStatus cm_counts_from_charfunc(const double *re,
                                      const double *im,
                                      size_t n,
                                      size_t n_max,
                                      double *probs);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONTMEAS_H */
