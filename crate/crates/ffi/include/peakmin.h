#ifndef PEAKMIN_H
#define PEAKMIN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmMode {
  /**
   * Fixed ratio; pass the ratio, or a value <= 0 for the optimal one.
   */
  PM_MODE_FIXED = 0,
  PM_MODE_ANYTIME = 1,
  /**
   * Anytime ratios that also spend inventory the worst case no longer needs.
   */
  PM_MODE_ANYTIME_DEPLETING = 2,
} PmMode;

typedef enum PmStatus {
  PM_STATUS_OK = 0,
  PM_STATUS_NULL_POINTER = 1,
  /**
   * The instance parameters violate a model assumption.
   */
  PM_STATUS_INVALID_INSTANCE = 2,
  PM_STATUS_INVALID_ARGUMENT = 3,
  PM_STATUS_DEMAND_OUT_OF_BOUNDS = 4,
  /**
   * The LP machinery failed or reported an inconsistent state.
   */
  PM_STATUS_SOLVER_FAILURE = 5,
  /**
   * Every slot of the session has been decided.
   */
  PM_STATUS_SESSION_FINISHED = 6,
  PM_STATUS_PANIC = 7,
} PmStatus;

/**
 * Problem data: capacity, rate limit, horizon and demand bounds.
 */
typedef struct PmInstance PmInstance;

/**
 * A running online policy over one horizon.
 */
typedef struct PmSession PmSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates an instance. A `rate_limit` that is not a positive finite number
 * means unbounded.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum PmStatus pm_instance_new(double capacity,
                              double rate_limit,
                              size_t horizon,
                              double demand_lb,
                              double demand_ub,
                              struct PmInstance **out);

/**
 * # Safety
 * `instance` must be null or a handle from [`pm_instance_new`] that has
 * not been freed.
 */
void pm_instance_free(struct PmInstance *instance);

/**
 * Optimal competitive ratio of the instance.
 *
 * # Safety
 * `instance` must be a live handle and `out_ratio` writable.
 */
enum PmStatus pm_optimal_cr(const struct PmInstance *instance, double *out_ratio);

/**
 * Offline optimum of a demand profile of length `len` (must equal the
 * horizon). `out_schedule` may be null; otherwise it receives `len` values.
 *
 * # Safety
 * `demand` must point to `len` readable doubles, `out_schedule` (if not
 * null) to `len` writable doubles, and `out_peak` must be writable.
 */
enum PmStatus pm_offline_solve(const struct PmInstance *instance,
                               const double *demand,
                               size_t len,
                               double *out_schedule,
                               double *out_peak);

/**
 * Starts an online session. `ratio` is the fixed ratio for
 * [`PmMode::Fixed`] and the starting ratio for the anytime modes; a value
 * <= 0 selects the optimal competitive ratio. `epsilon <= 0` selects the
 * default bisection tolerance. `monthly_peak` is the peak already billed
 * (0 for none).
 *
 * # Safety
 * `instance` must be a live handle and `out` writable.
 */
enum PmStatus pm_session_new(const struct PmInstance *instance,
                             enum PmMode mode,
                             double ratio,
                             double monthly_peak,
                             double epsilon,
                             struct PmSession **out);

/**
 * Decides the next slot. `out_ratio` may be null.
 *
 * # Safety
 * `session` must be a live handle; `out_discharge` must be writable and
 * `out_ratio` null or writable.
 */
enum PmStatus pm_session_step(struct PmSession *session,
                              double demand,
                              double *out_discharge,
                              double *out_ratio);

/**
 * Inventory left in the session.
 *
 * # Safety
 * `session` must be a live handle and `out` writable.
 */
enum PmStatus pm_session_remaining(const struct PmSession *session, double *out);

/**
 * # Safety
 * `session` must be null or a handle from [`pm_session_new`] that has not
 * been freed.
 */
void pm_session_free(struct PmSession *session);

/**
 * Copies the calling thread's last error message, NUL-terminated, into
 * `buf`. Returns the message length without the terminator, so a caller
 * can size the buffer with a first call passing `len = 0`. Returns 0 when
 * there is no error. If `len` is too small the message is truncated.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t pm_last_error_message(char *buf, size_t len);

/**
 * Static name of a status code, e.g. `"InvalidInstance"`.
 */
const char *pm_status_name(enum PmStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEAKMIN_H */
