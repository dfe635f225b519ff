/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef FPL_H
#define FPL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum FplStatus {
  FPL_STATUS_OK = 0,
  FPL_STATUS_NULL_POINTER = 1,
  FPL_STATUS_INVALID_ARGUMENT = 2,
  FPL_STATUS_CONFIG = 3,
  FPL_STATUS_HYPOTHESIS = 4,
  FPL_STATUS_NUMERICAL = 5,
  FPL_STATUS_INVALID_STATE = 6,
  FPL_STATUS_IO = 7,
  FPL_STATUS_PANIC = 8,
} FplStatus;

/**
 * Perturbation regime.
 */
typedef enum FplRegime {
  FPL_REGIME_FRESH_PER_STEP = 0,
  FPL_REGIME_INITIAL_ONCE = 1,
} FplRegime;

/**
 * Opaque FPL predictor.
 */
typedef struct FplPredictor FplPredictor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on this thread.
 */
const char *fpl_last_error_message(void);

/**
 * Creates a predictor over `n` experts.
 *
 * `complexities` holds `n` values, or is null for `k_i = ln n`.
 * `schedule_json` describes the rate, e.g. `{"kind":"dynamic-kt","k":0.69}`.
 * With `track_expected` nonzero, every observe reports the exact expected loss.
 *
 * # Safety
 * Pointers must be valid as described; `out` receives the handle.
 */
enum FplStatus fpl_predictor_new(uintptr_t n,
                                 const double *complexities,
                                 const char *schedule_json,
                                 enum FplRegime regime,
                                 uint64_t seed,
                                 uint64_t replica,
                                 int32_t track_expected,
                                 struct FplPredictor **out);

/**
 * Draws the decision for the next round.
 *
 * # Safety
 * `handle` must come from [`fpl_predictor_new`]; `expert` must be writable;
 * `eta` may be null.
 */
enum FplStatus fpl_predictor_decide(struct FplPredictor *handle, uintptr_t *expert, double *eta);

/**
 * Reveals the round's losses. `expected_loss` receives NaN unless the
 * predictor tracks expected losses; either output may be null.
 *
 * # Safety
 * `losses` must point to `n` doubles matching the predictor's size.
 */
enum FplStatus fpl_predictor_observe(struct FplPredictor *handle,
                                     const double *losses,
                                     uintptr_t n,
                                     double *actual_loss,
                                     double *expected_loss);

/**
 * Cumulative loss of each expert so far, written to `out[0..n]`.
 *
 * # Safety
 * `out` must point to `n` writable doubles.
 */
enum FplStatus fpl_predictor_expert_losses(const struct FplPredictor *handle,
                                           double *out,
                                           uintptr_t n);

/**
 * Releases a predictor. Null is ignored.
 *
 * # Safety
 * `handle` must come from [`fpl_predictor_new`] and not be used afterwards.
 */
void fpl_predictor_free(struct FplPredictor *handle);

/**
 * Exact `P[I = i]` for penalized scores `s_i + k_i/eta`; `+inf` marks an
 * inactive expert. Writes `n` probabilities to `out`.
 *
 * # Safety
 * `scores` and `out` must each point to `n` doubles.
 */
enum FplStatus fpl_choice_probabilities(const double *scores, uintptr_t n, double eta, double *out);

/**
 * `P[max_i (q_i - k_i) >= a]` for independent Exp(1) draws `q_i`.
 *
 * # Safety
 * `k` must point to `n` doubles and `out` must be writable.
 */
enum FplStatus fpl_shifted_max_cdf(double a, const double *k, uintptr_t n, double *out);

/**
 * Runs a built-in scenario and returns its report as JSON in `json_out`,
 * to be released with [`fpl_string_free`]. `seed` and `replicas` override the
 * scenario's defaults when `has_seed` / `replicas` are nonzero. `passed`
 * (nullable) receives 1 when every check passed.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `json_out` writable.
 */
enum FplStatus fpl_run_scenario(const char *name,
                                int32_t has_seed,
                                uint64_t seed,
                                uintptr_t replicas,
                                int32_t *passed,
                                char **json_out);

/**
 * Releases a string returned by the library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void fpl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FPL_H */
