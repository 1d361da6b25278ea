#ifndef TDP_H
#define TDP_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TdpStatus {
  TDP_STATUS_OK = 0,
  TDP_STATUS_NULL_POINTER = 1,
  TDP_STATUS_INVALID_INPUT = 2,
  TDP_STATUS_GAP_CLOSED = 3,
  TDP_STATUS_DEGENERATE = 4,
  TDP_STATUS_NOT_CONVERGED = 5,
  TDP_STATUS_NUMERICAL = 6,
  TDP_STATUS_PANIC = 7,
} TdpStatus;

/**
 * Spin-tensor/momentum couplings and the momentum scale.
 */
typedef struct TdpModel TdpModel;

/**
 * Berry flux through a loop, split into vector, tensor and boundary parts.
 */
typedef struct TdpFlux {
  double gamma;
  double gamma_f;
  double gamma_t;
  double boundary;
} TdpFlux;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a model. `k0` is the momentum radius and must be positive.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum TdpStatus tdp_model_new(double alpha, double beta, double k0, struct TdpModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`tdp_model_new`] and not have been freed.
 */
void tdp_model_free(struct TdpModel *model);

/**
 * Chern number of the lowest band on an `n_theta` x `n_phi` plaquette grid,
 * refined until stable.
 *
 * # Safety
 * `model` must be a live handle; `charge` and `residual` must be writable.
 */
enum TdpStatus tdp_monopole_charge(const struct TdpModel *model,
                                   size_t n_theta,
                                   size_t n_phi,
                                   int64_t *charge,
                                   double *residual);

/**
 * Berry flux of the lowest band through the small measurement loop of
 * radius `r` around `(theta, phi) = (3 pi / 4, pi)`, sampled at `samples`
 * points.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum TdpStatus tdp_small_loop_flux(const struct TdpModel *model,
                                   double r,
                                   size_t samples,
                                   struct TdpFlux *out);

/**
 * Spin vector `f[3]` and row-major quadrupole tensor `n[9]` of the ground
 * state at momentum direction `(theta, phi)`.
 *
 * # Safety
 * `model` must be a live handle; `f` must hold 3 and `n` 9 doubles.
 */
enum TdpStatus tdp_ground_moments(const struct TdpModel *model,
                                  double theta,
                                  double phi,
                                  double *f,
                                  double *n);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len` bytes, into `buf`. Returns the full message length
 * excluding the terminator; pass a null `buf` to query it.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t tdp_last_error_message(char *buf, size_t len);

/**
 * Static name of a status code.
 */
const char *tdp_status_name(enum TdpStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TDP_H */
