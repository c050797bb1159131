#ifndef MOMCP_H
#define MOMCP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes. `MOMCP_STATUS_OK` is zero.
typedef enum momcp_status {
  MOMCP_STATUS_OK = 0,
  MOMCP_STATUS_NULL_POINTER = 1,
  MOMCP_STATUS_INVALID_ARGUMENT = 2,
  MOMCP_STATUS_UNKNOWN_MODEL = 3,
  MOMCP_STATUS_DIMENSION_MISMATCH = 4,
  MOMCP_STATUS_OUT_OF_DOMAIN = 5,
  MOMCP_STATUS_INSUFFICIENT_DATA = 6,
  MOMCP_STATUS_DEGENERATE_SAMPLE = 7,
  MOMCP_STATUS_SINGULAR_JACOBIAN = 8,
  MOMCP_STATUS_SINGULAR_COVARIANCE = 9,
  MOMCP_STATUS_NO_CONVERGENCE = 10,
  MOMCP_STATUS_NON_FINITE = 11,
  MOMCP_STATUS_MISSING_CRITICAL_VALUE = 12,
  MOMCP_STATUS_BUFFER_TOO_SMALL = 13,
  MOMCP_STATUS_PANIC = 14,
} momcp_status;

// Opaque moment model handle.
typedef struct momcp_model momcp_model;

// Opaque result of a test or detection run.
typedef struct momcp_report momcp_report;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next call into this library on the same thread.
const char *momcp_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *momcp_version(void);

// Creates a model by name ("gamma", "exponential", "normal", "poisson", "bernoulli").
//
// # Safety
// `name` must be a valid NUL-terminated string and `out` a valid pointer.
// The handle written to `*out` must be released with [`momcp_model_free`].
enum momcp_status momcp_model_new(const char *name, struct momcp_model **out);

// # Safety
// `model` must be NULL or a handle from [`momcp_model_new`] not yet freed.
void momcp_model_free(struct momcp_model *model);

// Parameter dimension `d` of the model, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t momcp_model_dim(const struct momcp_model *model);

// Method-of-moments estimate of the parameter; writes `d` values to `theta_out`.
//
// # Safety
// `model` must be a live handle, `data` must hold `n` doubles and `theta_out`
// must have room for `theta_len` doubles.
enum momcp_status momcp_mme(const struct momcp_model *model,
                            const double *data,
                            size_t n,
                            double *theta_out,
                            size_t theta_len);

// Runs the sup test at `level`.
//
// A finite positive `critical_value` is used as is; pass NaN or a value
// `<= 0` to use the shipped table. `ridge` is added to the covariance
// diagonal (0 disables it).
//
// # Safety
// `model` must be a live handle, `data` must hold `n` doubles and `out` must
// be valid. Release the report with [`momcp_report_free`].
enum momcp_status momcp_run_test(const struct momcp_model *model,
                                 const double *data,
                                 size_t n,
                                 double level,
                                 double critical_value,
                                 double ridge,
                                 struct momcp_report **out);

// Computes the statistic path and change point estimate without a decision.
// The report's critical value is NaN and its reject flag is 0.
//
// # Safety
// As for [`momcp_run_test`].
enum momcp_status momcp_detect(const struct momcp_model *model,
                               const double *data,
                               size_t n,
                               struct momcp_report **out);

// # Safety
// `report` must be NULL or a handle not yet freed.
void momcp_report_free(struct momcp_report *report);

// `T_n`, or NaN for NULL.
//
// # Safety
// `report` must be NULL or a live handle.
double momcp_report_t_stat(const struct momcp_report *report);

// # Safety
// `report` must be NULL or a live handle.
double momcp_report_critical_value(const struct momcp_report *report);

// 1 when the test rejected, 0 otherwise.
//
// # Safety
// `report` must be NULL or a live handle.
int32_t momcp_report_reject(const struct momcp_report *report);

// # Safety
// `report` must be NULL or a live handle.
double momcp_report_u_hat(const struct momcp_report *report);

// # Safety
// `report` must be NULL or a live handle.
size_t momcp_report_k_hat(const struct momcp_report *report);

// Sample size `n`; the path has `n + 1` entries.
//
// # Safety
// `report` must be NULL or a live handle.
size_t momcp_report_n(const struct momcp_report *report);

// # Safety
// `report` must be NULL or a live handle.
size_t momcp_report_dim(const struct momcp_report *report);

// Copies the `d` estimated parameters.
//
// # Safety
// `report` must be a live handle and `out` must have room for `len` doubles.
enum momcp_status momcp_report_theta(const struct momcp_report *report, double *out, size_t len);

// Copies the `d * d` plug-in covariance in row-major order.
//
// # Safety
// `report` must be a live handle and `out` must have room for `len` doubles.
enum momcp_status momcp_report_sigma_hat(const struct momcp_report *report,
                                         double *out,
                                         size_t len);

// Copies the `n + 1` values `T_n(k/n)`, `k = 0..n`.
//
// # Safety
// `report` must be a live handle and `out` must have room for `len` doubles.
enum momcp_status momcp_report_path(const struct momcp_report *report, double *out, size_t len);

// Critical value from the shipped table.
//
// # Safety
// `value` must be a valid pointer.
enum momcp_status momcp_shipped_critical_value(size_t dim, double level, double *value);

// Simulates the `(1 - level)` quantile of the limit law with `reps`
// replications on a grid of `grid` steps.
//
// # Safety
// `value` and `stderr` must be valid pointers.
enum momcp_status momcp_simulate_critical_value(size_t dim,
                                                double level,
                                                size_t reps,
                                                size_t grid,
                                                uint64_t seed,
                                                double *value,
                                                double *stderr);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MOMCP_H */
