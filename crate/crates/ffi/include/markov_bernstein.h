#ifndef MARKOV_BERNSTEIN_H
#define MARKOV_BERNSTEIN_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. `MB_OK` is zero; everything else is a failure.
 */
typedef enum MbStatus {
  MB_OK = 0,
  MB_DOMAIN = 1,
  MB_DEGENERATE = 2,
  MB_SPEC = 3,
  MB_PRECONDITION = 4,
  MB_TRUNCATION = 5,
  MB_NUMERIC = 6,
  MB_CAPABILITY = 7,
  MB_INTEGRATION = 8,
  MB_STATE_CAP = 9,
  MB_ROUTE_INAPPLICABLE = 10,
  MB_IO = 11,
  MB_NULL_POINTER = 12,
  MB_PANIC = 13,
} MbStatus;

/**
 * A birth-death chain truncated to `0..=N`, with its stationary law and
 * generator.
 */
typedef struct MbBirthDeath MbBirthDeath;

/**
 * Monte Carlo estimate of `P(time average of centered g >= r)` with a
 * Wilson 95% interval.
 */
typedef struct MbTailEstimate {
  double p_hat;
  double ci_low;
  double ci_high;
  size_t hits;
  size_t n_paths;
} MbTailEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or NULL if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *mb_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mb_version(void);

/**
 * `alpha(r)` for variance proxy `sigma2` and scale `m`.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum MbStatus mb_rate_alpha(double sigma2, double m, double r, double *out);

/**
 * `alpha^-1(x) = sqrt(2 sigma2 x) + m x`.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum MbStatus mb_rate_alpha_inv(double sigma2, double m, double x, double *out);

/**
 * `min(1, prefactor * exp(-t alpha(r)))`. Set `classic` nonzero for the
 * looser `r^2 / (2 (sigma2 + m r))` exponent.
 *
 * # Safety
 * `out` must be a valid pointer to a `double`.
 */
enum MbStatus mb_tail_envelope(double sigma2,
                               double m,
                               double prefactor,
                               double t,
                               double r,
                               int32_t classic,
                               double *out);

/**
 * M/M/infinity chain with arrival rate `lambda`. `n = 0` picks the
 * truncation automatically.
 *
 * # Safety
 * `out` must be a valid pointer. Release the handle with `mb_birth_death_free`.
 */
enum MbStatus mb_birth_death_mm_infinity(double lambda, size_t n, struct MbBirthDeath **out);

/**
 * Chain with polynomially decaying stationary tail of exponent `a`.
 *
 * # Safety
 * `out` must be a valid pointer. Release the handle with `mb_birth_death_free`.
 */
enum MbStatus mb_birth_death_subgeometric(double a, size_t n, struct MbBirthDeath **out);

/**
 * Finite chain on `0..len-1` from birth rates `birth[k]` and death rates
 * `death[k]`.
 *
 * # Safety
 * `birth` and `death` must point to `len` doubles; `out` must be valid.
 */
enum MbStatus mb_birth_death_from_table(const double *birth,
                                        const double *death,
                                        size_t len,
                                        struct MbBirthDeath **out);

/**
 * Release a handle. NULL is ignored.
 *
 * # Safety
 * `h` must come from an `mb_birth_death_*` constructor and not be used again.
 */
void mb_birth_death_free(struct MbBirthDeath *h);

/**
 * Largest state kept, or 0 for NULL.
 *
 * # Safety
 * `h` must be NULL or a live handle.
 */
size_t mb_birth_death_truncation(const struct MbBirthDeath *h);

/**
 * Copy the stationary probabilities into `out[0..len]`; `written` receives
 * the number of states (call with `len = 0` to query it).
 *
 * # Safety
 * `h` must be live; `out` must hold `len` doubles; `written` must be valid.
 */
enum MbStatus mb_birth_death_stationary(const struct MbBirthDeath *h,
                                        double *out,
                                        size_t len,
                                        size_t *written);

/**
 * Spectral gap of the truncated generator.
 *
 * # Safety
 * `h` must be live; `out` must be valid.
 */
enum MbStatus mb_birth_death_spectral_gap(const struct MbBirthDeath *h, double *out);

/**
 * Asymptotic variance of the centered polynomial `sum coeffs[k] n^k`.
 *
 * # Safety
 * `h` must be live; `coeffs` must hold `n_coeffs` doubles; `out` must be valid.
 */
enum MbStatus mb_birth_death_asymptotic_variance(const struct MbBirthDeath *h,
                                                 const double *coeffs,
                                                 size_t n_coeffs,
                                                 double *out);

/**
 * Top eigenvalue of `L + s g` for the centered polynomial `g`.
 *
 * # Safety
 * `h` must be live; `coeffs` must hold `n_coeffs` doubles; `out` must be valid.
 */
enum MbStatus mb_birth_death_log_mgf_rate(const struct MbBirthDeath *h,
                                          const double *coeffs,
                                          size_t n_coeffs,
                                          double s,
                                          double *out);

/**
 * Simulate `n_paths` stationary paths up to `t`.
 *
 * # Safety
 * `h` must be live; `coeffs` must hold `n_coeffs` doubles; `out` must be valid.
 */
enum MbStatus mb_birth_death_tail_estimate(const struct MbBirthDeath *h,
                                           const double *coeffs,
                                           size_t n_coeffs,
                                           double t,
                                           double r,
                                           size_t n_paths,
                                           uint64_t seed,
                                           struct MbTailEstimate *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARKOV_BERNSTEIN_H */
