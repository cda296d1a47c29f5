#ifndef SPECTRAL_REG_H
#define SPECTRAL_REG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SrStatus {
  SR_STATUS_OK = 0,
  SR_STATUS_NULL_POINTER = 1,
  SR_STATUS_INVALID_ARGUMENT = 2,
  SR_STATUS_DIMENSION = 3,
  SR_STATUS_UNDEFINED = 4,
  SR_STATUS_NUMERICAL = 5,
  SR_STATUS_BUFFER_TOO_SMALL = 6,
  SR_STATUS_PANIC = 7,
} SrStatus;

/**
 * Per-coefficient data law.
 */
typedef struct SrDataLaw SrDataLaw;

/**
 * Spectral filter coefficients.
 */
typedef struct SrFilter SrFilter;

/**
 * Per-coefficient noise law.
 */
typedef struct SrNoiseLaw SrNoiseLaw;

/**
 * Singular system of a linear operator.
 */
typedef struct SrSystem SrSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty after a success).
 *
 * The pointer stays valid until the next `sr_*` call on the same thread.
 */
const char *sr_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sr_version(void);

/**
 * Synthetic system with `sigma_n = n^{-p}`, `n = 1..=len`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SrStatus sr_system_synthetic(size_t len, double p, struct SrSystem **out);

/**
 * System with the given singular values (sorted on construction).
 *
 * # Safety
 * `sigma` must point to `len` readable doubles; `out` as for [`sr_system_synthetic`].
 */
enum SrStatus sr_system_from_singular_values(const double *sigma,
                                             size_t len,
                                             struct SrSystem **out);

/**
 * SVD of a dense row-major `rows x cols` matrix.
 *
 * # Safety
 * `data` must point to `rows * cols` readable doubles; `out` as for [`sr_system_synthetic`].
 */
enum SrStatus sr_system_from_matrix(const double *data,
                                    size_t rows,
                                    size_t cols,
                                    struct SrSystem **out);

/**
 * Number of positive singular values.
 *
 * # Safety
 * `sys` must be a live handle; `out_len` must be writable.
 */
enum SrStatus sr_system_len(const struct SrSystem *sys, size_t *out_len);

/**
 * # Safety
 * `sys` must be null or a handle not yet freed.
 */
void sr_system_free(struct SrSystem *sys);

/**
 * Gaussian law with `Pi_n = n^{-a}`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SrStatus sr_law_from_decay(size_t len, double a, struct SrDataLaw **out);

/**
 * Law with explicit second moments and, if `abs_moment` is non-null,
 * explicit absolute first moments; otherwise Gaussian moments are used.
 *
 * # Safety
 * `pi` (and `abs_moment` if non-null) must point to `len` readable doubles.
 */
enum SrStatus sr_law_from_moments(const double *pi,
                                  const double *abs_moment,
                                  size_t len,
                                  struct SrDataLaw **out);

/**
 * # Safety
 * `law` must be null or a handle not yet freed.
 */
void sr_law_free(struct SrDataLaw *law);

/**
 * White measurement noise `Delta_n = delta^2`.
 *
 * # Safety
 * `out` must be writable.
 */
enum SrStatus sr_white_noise(size_t len, double delta, struct SrNoiseLaw **out);

/**
 * # Safety
 * `noise` must be null or a handle not yet freed.
 */
void sr_noise_free(struct SrNoiseLaw *noise);

/**
 * MSE-optimal filter `sigma Pi / (Pi sigma^2 + Delta)`.
 *
 * # Safety
 * Input handles must be live; `out` must be writable.
 */
enum SrStatus sr_filter_mse(const struct SrSystem *sys,
                            const struct SrDataLaw *law,
                            const struct SrNoiseLaw *noise,
                            struct SrFilter **out);

/**
 * Closed-form minimizer of the sup-norm adversarial risk.
 *
 * # Safety
 * Input handles must be live; `out` must be writable.
 */
enum SrStatus sr_filter_adv_inf(const struct SrSystem *sys,
                                const struct SrDataLaw *law,
                                double delta,
                                struct SrFilter **out);

/**
 * Tikhonov filter `sigma / (sigma^2 + alpha)`.
 *
 * # Safety
 * `sys` must be live; `out` must be writable.
 */
enum SrStatus sr_filter_tikhonov(const struct SrSystem *sys, double alpha, struct SrFilter **out);

/**
 * Copies the filter coefficients into `buf`.
 *
 * `out_len` always receives the coefficient count; if `cap` is smaller the
 * call fails with `SR_STATUS_BUFFER_TOO_SMALL` and writes nothing to `buf`.
 *
 * # Safety
 * `filter` must be live; `buf` must point to `cap` writable doubles.
 */
enum SrStatus sr_filter_coefficients(const struct SrFilter *filter,
                                     double *buf,
                                     size_t cap,
                                     size_t *out_len);

/**
 * # Safety
 * `filter` must be null or a handle not yet freed.
 */
void sr_filter_free(struct SrFilter *filter);

/**
 * Risk of the MSE-optimal filter.
 *
 * # Safety
 * Input handles must be live; `out_value` must be writable.
 */
enum SrStatus sr_risk_analytic(const struct SrSystem *sys,
                               const struct SrDataLaw *law,
                               const struct SrNoiseLaw *noise,
                               double *out_value);

/**
 * Expected risk `sum (1 - sigma g)^2 Pi + g^2 Delta` of any filter.
 *
 * # Safety
 * Input handles must be live; `out_value` must be writable.
 */
enum SrStatus sr_risk_generic(const struct SrFilter *filter,
                              const struct SrSystem *sys,
                              const struct SrDataLaw *law,
                              const struct SrNoiseLaw *noise,
                              double *out_value);

/**
 * `max_{|e| <= delta} |R[g](Ax + e) - x|^2` for a signal `x` in singular coordinates.
 *
 * # Safety
 * Handles must be live; `x` must point to `x_len` readable doubles.
 */
enum SrStatus sr_worst_case_l2(const struct SrFilter *filter,
                               const struct SrSystem *sys,
                               const double *x,
                               size_t x_len,
                               double delta,
                               double *out_value);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SPECTRAL_REG_H */
