#ifndef SEPCOV_H
#define SEPCOV_H

#pragma once

/* Generated by cbindgen. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum SepcovStatus {
  SEPCOV_STATUS_OK = 0,
  SEPCOV_STATUS_NULL_POINTER = 1,
  SEPCOV_STATUS_INVALID_INPUT = 2,
  SEPCOV_STATUS_POLE_HIT = 3,
  SEPCOV_STATUS_NO_CONVERGENCE = 4,
  SEPCOV_STATUS_INCONSISTENT_SCAN = 5,
  SEPCOV_STATUS_DEGENERATE = 6,
  SEPCOV_STATUS_OUT_OF_RANGE = 7,
  SEPCOV_STATUS_PANIC = 8,
} SepcovStatus;

typedef struct SepcovModel SepcovModel;

typedef struct SepcovSupport SepcovSupport;

/**
 * Solution of the master system at one point of the upper half plane.
 */
typedef struct SepcovSolution {
  double delta_re;
  double delta_im;
  double delta_tilde_re;
  double delta_tilde_im;
  double m_re;
  double m_im;
  double m_tilde_re;
  double m_tilde_im;
  double stab;
  double residual;
} SepcovSolution;

/**
 * Support edge. `side` is 0 for a left edge, 1 for a right edge;
 * `h_prime` is NaN for degenerate edges.
 */
typedef struct SepcovEdge {
  double a;
  double delta_tilde_a;
  double delta_a;
  int32_t side;
  double x_second;
  double h_prime;
  double f3;
} SepcovEdge;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message describing the last failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *sepcov_last_error(void);

/**
 * Builds a model from atom arrays `(t, w)` of `nu` and `nu_tilde`.
 *
 * # Safety
 * Each array must hold `len` readable doubles and `out` must be writable.
 */
enum SepcovStatus sepcov_model_new(double c,
                                   const double *nu_t,
                                   const double *nu_w,
                                   size_t nu_len,
                                   const double *nu_tilde_t,
                                   const double *nu_tilde_w,
                                   size_t nu_tilde_len,
                                   struct SepcovModel **out);

/**
 * # Safety
 * `model` must come from [`sepcov_model_new`] and not be used afterwards.
 */
void sepcov_model_free(struct SepcovModel *model);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SepcovStatus sepcov_solve(const struct SepcovModel *model,
                               double z_re,
                               double z_im,
                               struct SepcovSolution *out);

/**
 * Density of the limit measure at real `x != 0`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SepcovStatus sepcov_density_at(const struct SepcovModel *model, double x, double *out);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SepcovStatus sepcov_mass_at_zero(const struct SepcovModel *model, double *out);

/**
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum SepcovStatus sepcov_support_new(const struct SepcovModel *model, struct SepcovSupport **out);

/**
 * # Safety
 * `support` must come from [`sepcov_support_new`] and not be used afterwards.
 */
void sepcov_support_free(struct SepcovSupport *support);

/**
 * Number of support intervals, 0 for a null handle.
 *
 * # Safety
 * `support` must be null or a live handle.
 */
size_t sepcov_support_len(const struct SepcovSupport *support);

/**
 * # Safety
 * `support` must be a live handle; `lo` and `hi` writable.
 */
enum SepcovStatus sepcov_support_interval(const struct SepcovSupport *support,
                                          size_t index,
                                          double *lo,
                                          double *hi);

/**
 * Mass of the atom at zero, NaN for a null handle.
 *
 * # Safety
 * `support` must be null or a live handle.
 */
double sepcov_support_atom(const struct SepcovSupport *support);

/**
 * # Safety
 * `support` must be null or a live handle.
 */
size_t sepcov_support_edge_count(const struct SepcovSupport *support);

/**
 * # Safety
 * `support` must be a live handle and `out` writable.
 */
enum SepcovStatus sepcov_support_edge(const struct SepcovSupport *support,
                                      size_t index,
                                      struct SepcovEdge *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEPCOV_H */
