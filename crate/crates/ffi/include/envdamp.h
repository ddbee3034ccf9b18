/* C interface to the envdamp modal damping estimation library. */

#ifndef ENVDAMP_H
#define ENVDAMP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum EdStatus {
  ED_STATUS_OK = 0,
  ED_STATUS_NULL_POINTER = 1,
  /**
   * A parameter or input array violates a precondition.
   */
  ED_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The data do not support an estimate (segment too short, no decay,
   * degenerate peak, singular fit, no pole near the target).
   */
  ED_STATUS_ESTIMATION_FAILED = 3,
  ED_STATUS_PANIC = 4,
} EdStatus;

/**
 * The nine envelope estimator shapes.
 */
typedef enum EdKernelForm {
  ED_KERNEL_FORM_GAUSSIAN_WINDOW = 0,
  ED_KERNEL_FORM_RECT_WINDOW = 1,
  ED_KERNEL_FORM_SHANNON_FILTER = 2,
  ED_KERNEL_FORM_TRIANGLE_FILTER = 3,
  ED_KERNEL_FORM_TRIANGLE_WINDOW = 4,
  ED_KERNEL_FORM_WELCH_FILTER = 5,
  ED_KERNEL_FORM_WELCH_WINDOW = 6,
  ED_KERNEL_FORM_BLACKMAN_FILTER = 7,
  ED_KERNEL_FORM_BLACKMAN_WINDOW = 8,
} EdKernelForm;

/**
 * Opaque envelope estimator: a form, a width and a center frequency.
 */
typedef struct EdKernel EdKernel;

/**
 * Opaque set of fitted poles.
 */
typedef struct EdPoleSet EdPoleSet;

/**
 * Segment selection settings; see [`ed_segment_policy_default`].
 */
typedef struct EdSegmentPolicy {
  double floor_fraction;
  double cycles;
  double edge_guard_cycles;
} EdSegmentPolicy;

/**
 * Log-linear fit result.
 */
typedef struct EdDampingEstimate {
  double zeta;
  double slope;
  double intercept;
  size_t segment_start;
  size_t segment_end;
  double r_squared;
} EdDampingEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or `NULL` if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *ed_last_error_message(void);

/**
 * Default segment policy: 5% floor, 10 cycles, 5 guard cycles.
 */
struct EdSegmentPolicy ed_segment_policy_default(void);

/**
 * Creates a kernel. `theta` is seconds for windows and rad/s for filters.
 *
 * # Safety
 * `out_kernel` must be a valid pointer to writable storage for one handle.
 */
enum EdStatus ed_kernel_new(enum EdKernelForm form,
                            double theta,
                            double center_freq_hz,
                            struct EdKernel **out_kernel);

/**
 * # Safety
 * `kernel` must be `NULL` or a handle from [`ed_kernel_new`] not yet freed.
 */
void ed_kernel_free(struct EdKernel *kernel);

/**
 * Envelope of one record; `out_envelope` receives `n` values.
 *
 * # Safety
 * `samples` and `out_envelope` must each address `n` doubles.
 */
enum EdStatus ed_extract_envelope(const struct EdKernel *kernel,
                                  const double *samples,
                                  size_t n,
                                  double sample_rate_hz,
                                  double *out_envelope);

/**
 * Fits the damping ratio to an envelope. `policy` may be `NULL` for the
 * defaults.
 *
 * # Safety
 * `envelope` must address `n` doubles; `policy` must be `NULL` or valid;
 * `out_estimate` must be writable.
 */
enum EdStatus ed_fit_damping(const double *envelope,
                             size_t n,
                             double sample_rate_hz,
                             double mode_freq_hz,
                             const struct EdSegmentPolicy *policy,
                             struct EdDampingEstimate *out_estimate);

/**
 * Full ensemble pipeline: `n_records` records of `n` samples each, stored
 * row-major in `records`. The mode frequency is the kernel's center.
 *
 * # Safety
 * `records` must address `n_records * n` doubles; `policy` must be `NULL`
 * or valid; `out_estimate` must be writable.
 */
enum EdStatus ed_estimate_damping(const struct EdKernel *kernel,
                                  const double *records,
                                  size_t n_records,
                                  size_t n,
                                  double sample_rate_hz,
                                  const struct EdSegmentPolicy *policy,
                                  struct EdDampingEstimate *out_estimate);

/**
 * Half-power damping ratio around the FRF bin `peak_index`.
 *
 * # Safety
 * `freqs_hz`, `re` and `im` must each address `n` doubles; `out_zeta`
 * must be writable.
 */
enum EdStatus ed_half_power_damping(const double *freqs_hz,
                                    const double *re,
                                    const double *im,
                                    size_t n,
                                    size_t peak_index,
                                    double *out_zeta);

/**
 * Rational fit of the FRF magnitude; returns the stable poles.
 *
 * # Safety
 * `freqs_hz`, `re` and `im` must each address `n` doubles; `out_poles`
 * must be writable.
 */
enum EdStatus ed_lsrf_fit(const double *freqs_hz,
                          const double *re,
                          const double *im,
                          size_t n,
                          size_t num_order,
                          size_t den_order,
                          size_t n_iters,
                          struct EdPoleSet **out_poles);

/**
 * Number of poles in the set (0 for `NULL`).
 *
 * # Safety
 * `poles` must be `NULL` or a live handle.
 */
size_t ed_pole_set_len(const struct EdPoleSet *poles);

/**
 * Pole `index` in rad/s.
 *
 * # Safety
 * `poles` must be a live handle; `out_re` and `out_im` must be writable.
 */
enum EdStatus ed_pole_set_get(const struct EdPoleSet *poles,
                              size_t index,
                              double *out_re,
                              double *out_im);

/**
 * Damping ratio and frequency (Hz) of the stable pole nearest
 * `target_freq_hz` within 20% of it.
 *
 * # Safety
 * `poles` must be a live handle; outputs must be writable.
 */
enum EdStatus ed_pole_set_match(const struct EdPoleSet *poles,
                                double target_freq_hz,
                                double *out_zeta,
                                double *out_freq_hz);

/**
 * # Safety
 * `poles` must be `NULL` or a handle from [`ed_lsrf_fit`] not yet freed.
 */
void ed_pole_set_free(struct EdPoleSet *poles);

/**
 * Noise-free impulse response of `n_modes` modes, `n` samples.
 *
 * # Safety
 * The three mode arrays must address `n_modes` doubles each and
 * `out_samples` must address `n` doubles.
 */
enum EdStatus ed_synthesize_response(const double *damped_freqs_hz,
                                     const double *damping_ratios,
                                     const double *amplitudes,
                                     size_t n_modes,
                                     size_t n,
                                     double sample_rate_hz,
                                     double *out_samples);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENVDAMP_H */
