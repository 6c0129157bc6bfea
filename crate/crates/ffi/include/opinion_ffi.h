#ifndef OPINION_FFI_H
#define OPINION_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OpIntegrator {
  OP_INTEGRATOR_RK4 = 0,
  OP_INTEGRATOR_EULER = 1,
} OpIntegrator;

typedef enum OpStatus {
  OP_STATUS_OK = 0,
  OP_STATUS_NULL_POINTER = 1,
  OP_STATUS_INVALID_ARGUMENT = 2,
  OP_STATUS_INVALID_MEASURE = 3,
  OP_STATUS_NUMERICAL_FAILURE = 4,
  OP_STATUS_OUT_OF_RANGE = 5,
  OP_STATUS_PANIC = 6,
} OpStatus;

/**
 * Weighted `(y, theta)` cloud.
 */
typedef struct OpMeasure OpMeasure;

/**
 * Solved mono-opinion profile.
 */
typedef struct OpProfile OpProfile;

/**
 * Snapshots of a simulation.
 */
typedef struct OpTrajectory OpTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *op_last_error_message(void);

/**
 * Builds a measure from `n` atoms. Weights must sum to one.
 *
 * # Safety
 * `ys`, `thetas` and `weights` must point to `n` readable doubles and `out`
 * to a writable handle slot.
 */
enum OpStatus op_measure_new(const double *ys,
                             const double *thetas,
                             const double *weights,
                             size_t n,
                             struct OpMeasure **out);

/**
 * # Safety
 * `mu` must be null or a handle from [`op_measure_new`] not yet freed.
 */
void op_measure_free(struct OpMeasure *mu);

/**
 * Number of atoms, or 0 for a null handle.
 *
 * # Safety
 * `mu` must be null or a live handle.
 */
size_t op_measure_len(const struct OpMeasure *mu);

/**
 * W1 distance between two weighted point sets on the line.
 *
 * # Safety
 * Each position/weight pointer must cover its length; `out` must be
 * writable.
 */
enum OpStatus op_wasserstein1_1d(const double *xa,
                                 const double *wa,
                                 size_t na,
                                 const double *xb,
                                 const double *wb,
                                 size_t nb,
                                 double *out);

/**
 * W1 distance on `(y, theta)` space with the `|dy| + |dtheta|` metric.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
enum OpStatus op_wasserstein1_joint(const struct OpMeasure *a,
                                    const struct OpMeasure *b,
                                    double *out);

/**
 * Largest per-conviction W1 distance between two measures with the same
 * convictions.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
enum OpStatus op_sup_slice_distance(const struct OpMeasure *a,
                                    const struct OpMeasure *b,
                                    double *out);

/**
 * Integrates the model from `mu0`. `integrator` takes an [`OpIntegrator`]
 * value.
 *
 * # Safety
 * `mu0` must be a live handle and `out` a writable handle slot.
 */
enum OpStatus op_simulate(const struct OpMeasure *mu0,
                          double sigma,
                          double p,
                          double t_final,
                          double dt,
                          size_t snapshot_stride,
                          uint32_t integrator,
                          struct OpTrajectory **out);

/**
 * # Safety
 * `traj` must be null or a handle from [`op_simulate`] not yet freed.
 */
void op_trajectory_free(struct OpTrajectory *traj);

/**
 * Number of snapshots, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t op_trajectory_len(const struct OpTrajectory *traj);

/**
 * Number of atoms per snapshot, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be null or a live handle.
 */
size_t op_trajectory_atoms(const struct OpTrajectory *traj);

/**
 * Time of snapshot `k`.
 *
 * # Safety
 * `traj` must be a live handle and `out` writable.
 */
enum OpStatus op_trajectory_time(const struct OpTrajectory *traj, size_t k, double *out);

/**
 * Energy at snapshot `k`.
 *
 * # Safety
 * `traj` must be a live handle and `out` writable.
 */
enum OpStatus op_trajectory_energy(const struct OpTrajectory *traj, size_t k, double *out);

/**
 * Dissipation at snapshot `k`.
 *
 * # Safety
 * `traj` must be a live handle and `out` writable.
 */
enum OpStatus op_trajectory_dissipation(const struct OpTrajectory *traj, size_t k, double *out);

/**
 * Copies the opinions of snapshot `k` into `ys`, which must hold exactly
 * [`op_trajectory_atoms`] values.
 *
 * # Safety
 * `traj` must be a live handle and `ys` must point to `n` writable doubles.
 */
enum OpStatus op_trajectory_positions(const struct OpTrajectory *traj,
                                      size_t k,
                                      double *ys,
                                      size_t n);

/**
 * Positive root `g` of `alpha + (theta - 1) g - g^(p+1) = 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum OpStatus op_solve_g_given_alpha(double theta, double alpha, double p, double *out);

/**
 * Self-consistent profile for the conviction marginal with `n` atoms
 * (`sigma = 1` variables), sampled on `grid_n` points.
 *
 * # Safety
 * `thetas` and `masses` must point to `n` readable doubles and `out` to a
 * writable handle slot.
 */
enum OpStatus op_solve_profile(const double *thetas,
                               const double *masses,
                               size_t n,
                               double p,
                               size_t grid_n,
                               struct OpProfile **out);

/**
 * # Safety
 * `profile` must be null or a handle from [`op_solve_profile`] not yet
 * freed.
 */
void op_profile_free(struct OpProfile *profile);

/**
 * Number of grid points, or 0 for a null handle.
 *
 * # Safety
 * `profile` must be null or a live handle.
 */
size_t op_profile_len(const struct OpProfile *profile);

/**
 * The self-consistency constant (mean limiting opinion).
 *
 * # Safety
 * `profile` must be a live handle and `out` writable.
 */
enum OpStatus op_profile_alpha(const struct OpProfile *profile, double *out);

/**
 * Copies the grid and profile values into buffers of exactly
 * [`op_profile_len`] doubles.
 *
 * # Safety
 * `profile` must be a live handle; `thetas` and `g` must point to `n`
 * writable doubles.
 */
enum OpStatus op_profile_values(const struct OpProfile *profile,
                                double *thetas,
                                double *g,
                                size_t n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OPINION_FFI_H */
