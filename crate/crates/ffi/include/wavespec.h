#ifndef WAVESPEC_H
#define WAVESPEC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum WsStatus {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_POINTER = 1,
  // Argument outside the domain of the operation.
  WS_STATUS_DOMAIN = 2,
  // Inconsistent or unsupported configuration.
  WS_STATUS_CONFIG = 3,
  // A numerical procedure failed.
  WS_STATUS_NUMERICAL = 4,
  WS_STATUS_IO = 5,
  WS_STATUS_PARSE = 6,
  // Caller-supplied buffer is too short.
  WS_STATUS_BUFFER_TOO_SMALL = 7,
  // A Rust panic was caught at the boundary.
  WS_STATUS_PANIC = 8,
} WsStatus;

// Estimators accepted by [`ws_fit`].
typedef enum WsMethod {
  WS_METHOD_LEAST_SQUARES = 0,
  WS_METHOD_BARTLETT_LEAST_SQUARES = 1,
  WS_METHOD_WHITTLE = 2,
  WS_METHOD_ALIASED_WHITTLE = 3,
  WS_METHOD_DEBIASED_WHITTLE = 4,
  WS_METHOD_GAUSSIAN_ML = 5,
} WsMethod;

// Fitted parameters and diagnostics.
typedef struct WsFit WsFit;

// Precomputed circulant embedding for repeated simulation.
typedef struct WsSimulator WsSimulator;

// Free parameters of the spectrum with the default shape constants.
typedef struct WsParams {
  double alpha;
  double omega_p;
  double gamma;
  double r;
} WsParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *ws_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ws_version(void);

// Canonical parameters `(0.7, 0.7, 3.3, 4)`.
struct WsParams ws_params_canonical(void);

// Spectral density at `n` angular frequencies.
enum WsStatus ws_spectrum(const struct WsParams *params,
                          const double *omegas,
                          size_t n,
                          double *out);

// Expected periodogram of a record of `n` samples at spacing `delta`,
// written in ascending frequency order (`n` values, indices
// `-ceil(n/2)+1 ..= floor(n/2)`).
enum WsStatus ws_expected_periodogram(const struct WsParams *params,
                                      double delta,
                                      size_t n,
                                      bool differenced,
                                      double *out,
                                      size_t out_len);

// Builds a simulator for records of `n` samples at spacing `delta`.
enum WsStatus ws_simulator_new(const struct WsParams *params,
                               double delta,
                               size_t n,
                               struct WsSimulator **out);

// Writes record `rep` of the stream seeded by `seed` into `out`, which must
// hold `out_len >= n` values. The same `(seed, rep)` always gives the same
// record.
enum WsStatus ws_simulator_sample(const struct WsSimulator *sim,
                                  uint64_t seed,
                                  uint64_t rep,
                                  double *out,
                                  size_t out_len);

void ws_simulator_free(struct WsSimulator *sim);

// Fits `method` to the `n` samples at `x`, using Fourier frequencies with
// `omega_min <= |w| <= omega_max` other than zero and Nyquist. Pass
// `INFINITY` for an open upper end.
enum WsStatus ws_fit(const double *x,
                     size_t n,
                     double delta,
                     enum WsMethod method,
                     double omega_min,
                     double omega_max,
                     struct WsFit **out);

// Estimated parameters.
enum WsStatus ws_fit_params(const struct WsFit *fit, struct WsParams *out);

// Objective at the optimum (maximised form) and the convergence flag.
enum WsStatus ws_fit_summary(const struct WsFit *fit, double *objective, bool *converged);

// Sandwich standard errors and confidence intervals at coverage `level`
// for a de-biased Whittle fit. Lower ends are clipped to the parameter
// space. Any output pointer may be null.
enum WsStatus ws_fit_confidence_intervals(const struct WsFit *fit,
                                          double level,
                                          struct WsParams *std_error,
                                          struct WsParams *lower,
                                          struct WsParams *upper);

void ws_fit_free(struct WsFit *fit);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WAVESPEC_H */
