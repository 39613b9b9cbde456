#ifndef ECFNORM_H
#define ECFNORM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EcfnormStatus {
  ECFNORM_STATUS_OK = 0,
  ECFNORM_STATUS_NULL_POINTER = 1,
  ECFNORM_STATUS_INVALID_ARGUMENT = 2,
  // Too few observations, non-finite values, or bad shapes.
  ECFNORM_STATUS_DATA_ERROR = 3,
  ECFNORM_STATUS_SINGULAR_COVARIANCE = 4,
  ECFNORM_STATUS_NUMERICAL_FAILURE = 5,
  ECFNORM_STATUS_PANIC = 6,
} EcfnormStatus;

// Scaled residuals of one sample.
typedef struct EcfnormResiduals EcfnormResiduals;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty after success.
// Valid until the next call into this library from the same thread.
const char *ecfnorm_last_error(void);

// Library version as a static NUL-terminated string.
const char *ecfnorm_version(void);

// Standardize an `n x d` row-major sample into a new handle.
//
// # Safety
// `data` must point to `n * d` readable doubles and `out` to a writable
// handle pointer.
enum EcfnormStatus ecfnorm_residuals_new(const double *data,
                                         size_t n,
                                         size_t d,
                                         struct EcfnormResiduals **out);

// Release a handle; null is ignored.
//
// # Safety
// `handle` must come from [`ecfnorm_residuals_new`] and not be freed twice.
void ecfnorm_residuals_free(struct EcfnormResiduals *handle);

// `U_{n,a}` (`out_u`) and its table normalization `d^{-2} (a/pi)^{d/2} U`
// (`out_scaled`). Either out-pointer may be null.
//
// # Safety
// `handle` must be a live handle; non-null out-pointers must be writable.
enum EcfnormStatus ecfnorm_u_statistic(const struct EcfnormResiduals *handle,
                                       double a,
                                       double *out_u,
                                       double *out_scaled);

// Mardia kurtosis of the residuals.
//
// # Safety
// `handle` must be live and `out` writable.
enum EcfnormStatus ecfnorm_kurtosis(const struct EcfnormResiduals *handle, double *out);

// Mori-Rohatgi-Szekely skewness of the residuals.
//
// # Safety
// `handle` must be live and `out` writable.
enum EcfnormStatus ecfnorm_skewness(const struct EcfnormResiduals *handle, double *out);

// Monte Carlo `(1 - alpha)` critical value of the table-normalized statistic.
//
// # Safety
// `out` must be writable.
enum EcfnormStatus ecfnorm_critical_value(size_t n,
                                          size_t d,
                                          double a,
                                          double alpha,
                                          size_t reps,
                                          uint64_t seed,
                                          double *out);

// Monte Carlo p-value of the sample behind `handle` at tuning parameter `a`.
//
// # Safety
// `handle` must be live and `out` writable.
enum EcfnormStatus ecfnorm_p_value(const struct EcfnormResiduals *handle,
                                   double a,
                                   size_t reps,
                                   uint64_t seed,
                                   double *out);

// Mean of the limit null law of `U_{n,a}`.
//
// # Safety
// `out` must be writable.
enum EcfnormStatus ecfnorm_mean_limit(size_t d, double a, double *out);

// Number of observations behind a handle, or 0 for null.
//
// # Safety
// `handle` must be live or null.
size_t ecfnorm_residuals_n(const struct EcfnormResiduals *handle);

// Dimension behind a handle, or 0 for null.
//
// # Safety
// `handle` must be live or null.
size_t ecfnorm_residuals_d(const struct EcfnormResiduals *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECFNORM_H */
