/* C interface for the hold-out size selection toolkit. */

#ifndef HOLDOUT_H
#define HOLDOUT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible FFI function.
typedef enum HoldoutStatus {
  // Success.
  HOLDOUT_STATUS_OK = 0,
  // A required pointer argument was NULL.
  HOLDOUT_STATUS_NULL_POINTER = 1,
  // An argument was out of range or otherwise invalid.
  HOLDOUT_STATUS_INVALID_ARGUMENT = 2,
  // The anchor losses are not monotone increasing in m.
  HOLDOUT_STATUS_NON_MONOTONE_ANCHORS = 3,
  // No hold-out size is feasible at the requested sigma2.
  HOLDOUT_STATUS_INFEASIBLE = 4,
  // m or K lies outside the curve's domain.
  HOLDOUT_STATUS_OUT_OF_DOMAIN = 5,
  // Unexpected internal failure (a bug; details in the error message).
  HOLDOUT_STATUS_INTERNAL_ERROR = 6,
} HoldoutStatus;

// Opaque loss-curve handle.
typedef struct HoldoutCurve HoldoutCurve;

// Power-fit parameters of a curve, for inspection.
typedef struct HoldoutPowerFit {
  double exponent;
  double scale;
  double offset;
  double beta;
  double alpha;
} HoldoutPowerFit;

// Result of minimizing estimated loss + variance bound over m.
typedef struct HoldoutOptimalSplit {
  // Optimal hold-out size.
  size_t m_star;
  // N / m_star.
  double implied_k;
  // Negative utility at the minimizer.
  double utility;
} HoldoutOptimalSplit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the most recent failure on this thread, or an empty
// string. Valid until the next failing call on the same thread.
const char *holdout_last_error_message(void);

// Fit the three-anchor power loss curve.
//
// `l_loo`, `l_kref`, `l_lmo` are the CV losses at m = 1, m = N/k_ref and
// m = N/2; `n` is the dataset size. On success writes a handle that the
// caller must release with `holdout_curve_free`.
//
// # Safety
// `out_curve` must be valid for writes.
enum HoldoutStatus holdout_curve_fit_power(double l_loo,
                                           double l_kref,
                                           double l_lmo,
                                           size_t k_ref,
                                           size_t n,
                                           struct HoldoutCurve **out_curve);

// Release a curve handle. NULL is a no-op. The handle must not be used
// afterwards.
//
// # Safety
// `curve` must be a handle returned by this library, released at most once.
void holdout_curve_free(struct HoldoutCurve *curve);

// Read back the power-fit parameters.
//
// # Safety
// `curve` must be a live handle; `out_fit` valid for writes.
enum HoldoutStatus holdout_curve_power_fit(const struct HoldoutCurve *curve,
                                           struct HoldoutPowerFit *out_fit);

// Estimated loss `E(m; sigma2)`. Fails with `OutOfDomain` outside
// [1, N/2].
//
// # Safety
// `curve` must be a live handle; `out_loss` valid for writes.
enum HoldoutStatus holdout_eval_loss(const struct HoldoutCurve *curve,
                                     size_t m,
                                     double sigma2,
                                     double *out_loss);

// Variance bound `C sigma2 E(m; sigma2) / m` with C = 4 (symmetric) or 16.
//
// # Safety
// `curve` must be a live handle; `out_bound` valid for writes.
enum HoldoutStatus holdout_eval_variance_bound(const struct HoldoutCurve *curve,
                                               size_t m,
                                               double sigma2,
                                               bool symmetric,
                                               double *out_bound);

// Optimal hold-out size at `sigma2`. Fails with `Infeasible` when the
// estimated loss is negative for every m.
//
// # Safety
// `curve` must be a live handle; `out_split` valid for writes.
enum HoldoutStatus holdout_optimal_m(const struct HoldoutCurve *curve,
                                     double sigma2,
                                     bool symmetric,
                                     struct HoldoutOptimalSplit *out_split);

// Loose upper bound on plausible sigma2: the smallest sigma2 whose optimal
// m reaches the frontier's maximum.
//
// # Safety
// `curve` must be a live handle; `out_sigma2` valid for writes.
enum HoldoutStatus holdout_sigma2_upper_bound(const struct HoldoutCurve *curve,
                                              bool symmetric,
                                              double *out_sigma2);

// The sigma2 under which K-fold CV (m = N/K) would be optimal. Writes
// `*out_found = false` (and leaves `*out_sigma2` untouched) when no such
// sigma2 exists — the "-" entries of the implicit-sigma2 table.
//
// # Safety
// `curve` must be a live handle; `out_sigma2` and `out_found` valid for
// writes.
enum HoldoutStatus holdout_implicit_sigma2(const struct HoldoutCurve *curve,
                                           size_t k,
                                           bool symmetric,
                                           double *out_sigma2,
                                           bool *out_found);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* HOLDOUT_H */
