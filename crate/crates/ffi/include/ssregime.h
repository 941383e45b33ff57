#ifndef SSREGIME_H
#define SSREGIME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every function.
 */
typedef enum SsrStatus {
  SSR_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SSR_NULL_POINTER = 1,
  /**
   * Malformed arguments, files or data.
   */
  SSR_INVALID_INPUT = 2,
  /**
   * Rank deficiency, separation, an empty arm or similar.
   */
  SSR_NUMERICAL = 3,
  /**
   * Too many simulation replications failed.
   */
  SSR_TOO_MANY_FAILURES = 4,
  /**
   * An output buffer was shorter than required.
   */
  SSR_BUFFER_TOO_SMALL = 5,
  /**
   * An internal panic was caught at the boundary.
   */
  SSR_INTERNAL = 6,
} SsrStatus;

typedef enum SsrMethod {
  SSR_METHOD_TR = 0,
  SSR_METHOD_NP = 1,
  SSR_METHOD_SS = 2,
} SsrMethod;

/**
 * Opaque dataset handle.
 */
typedef struct SsrDataset SsrDataset;

/**
 * Opaque fit handle.
 */
typedef struct SsrFit SsrFit;

/**
 * Estimation settings; obtain defaults from `ssr_fit_options_default`.
 */
typedef struct SsrFitOptions {
  enum SsrMethod method;
  size_t kfolds;
  /**
   * Bandwidth on the standardized scale; zero or negative selects it by
   * cross-validation.
   */
  double bandwidth;
  double clip_eps;
  uint64_t seed;
} SsrFitOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the most recent failure on this thread, or null.
 * The pointer stays valid until the next library call on the same thread.
 */
const char *ssr_last_error_message(void);

/**
 * Releases a string returned by the library. Null is ignored.
 */
void ssr_string_free(char *s);

/**
 * Loads a labeled CSV (header `x1,...,xp,a,y`) and an optional unlabeled
 * CSV (header `x1,...,xp`; pass null to omit).
 */
enum SsrStatus ssr_dataset_from_csv(const char *labeled_path,
                                    const char *unlabeled_path,
                                    struct SsrDataset **out);

/**
 * Builds a dataset from row-major arrays: `x_labeled` is `n x p`, `a` and
 * `y` have length `n`, `x_unlabeled` is `big_n x p` (may be null when
 * `big_n` is zero).
 */
enum SsrStatus ssr_dataset_new(const double *x_labeled,
                               const uint8_t *a,
                               const double *y,
                               size_t n,
                               const double *x_unlabeled,
                               size_t big_n,
                               size_t p,
                               struct SsrDataset **out);

/**
 * Labeled size, unlabeled size and covariate dimension. Any out-pointer
 * may be null.
 */
enum SsrStatus ssr_dataset_dims(const struct SsrDataset *ds, size_t *n, size_t *big_n, size_t *p);

void ssr_dataset_free(struct SsrDataset *ds);

/**
 * SS estimator, 5 folds, cross-validated bandwidth, clipping at 0.01,
 * seed 0.
 */
struct SsrFitOptions ssr_fit_options_default(void);

/**
 * Estimates a treatment regime. `options` may be null for the defaults.
 */
enum SsrStatus ssr_fit(const struct SsrDataset *ds,
                       const struct SsrFitOptions *options,
                       struct SsrFit **out);

/**
 * Number of coefficients, `p + 1`.
 */
enum SsrStatus ssr_fit_dim(const struct SsrFit *fit, size_t *out);

/**
 * Coefficients on the standardized covariate scale.
 */
enum SsrStatus ssr_fit_beta(const struct SsrFit *fit, double *out, size_t len);

/**
 * Standard errors on the standardized covariate scale.
 */
enum SsrStatus ssr_fit_se(const struct SsrFit *fit, double *out, size_t len);

/**
 * Coefficients on the raw covariate scale.
 */
enum SsrStatus ssr_fit_beta_raw(const struct SsrFit *fit, double *out, size_t len);

/**
 * Standard errors on the raw covariate scale.
 */
enum SsrStatus ssr_fit_se_raw(const struct SsrFit *fit, double *out, size_t len);

/**
 * Selected bandwidth, or NaN for the TR estimator.
 */
enum SsrStatus ssr_fit_bandwidth(const struct SsrFit *fit, double *out);

/**
 * Applies the fitted rule to `rows x p` raw covariates, writing 1 (treat)
 * or 0 per row into `out`.
 */
enum SsrStatus ssr_fit_decide(const struct SsrFit *fit,
                              const double *x,
                              size_t rows,
                              size_t p,
                              uint8_t *out);

/**
 * Fit report as JSON, in the same format the command-line `fit` writes.
 * Release with `ssr_string_free`.
 */
enum SsrStatus ssr_fit_to_json(const struct SsrFit *fit, char **out);

void ssr_fit_free(struct SsrFit *fit);

/**
 * Runs a simulation study described by a JSON object and returns the
 * study report as JSON. `model` and `baseline` are required; any other
 * configuration field (`n`, `N`, `replications`, `seed`, ...) overrides
 * its default.
 */
enum SsrStatus ssr_simulate_json(const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SSREGIME_H */
