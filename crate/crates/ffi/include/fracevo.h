#ifndef FRACEVO_H
#define FRACEVO_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Pointwise nonlinearity `b(u)` entering the equation as `+B(u)`.
 */
typedef enum FracevoNonlinearity {
  /**
   * `b = 0`
   */
  FRACEVO_NONLINEARITY_ZERO = 0,
  /**
   * `b(u) = c·u`
   */
  FRACEVO_NONLINEARITY_LINEAR = 1,
  /**
   * `b(u) = c·u²`
   */
  FRACEVO_NONLINEARITY_QUADRATIC = 2,
  /**
   * `b(u) = c·u³`, `c > 0`
   */
  FRACEVO_NONLINEARITY_CUBIC_DISSIPATIVE = 3,
  /**
   * `b(u) = −c·e^{−1/u}` for `u > 0`
   */
  FRACEVO_NONLINEARITY_COMBUSTION = 4,
} FracevoNonlinearity;

/**
 * Result code of every fallible call.
 */
typedef enum FracevoStatus {
  FRACEVO_STATUS_OK = 0,
  FRACEVO_STATUS_NULL_POINTER = 1,
  FRACEVO_STATUS_INVALID_ARGUMENT = 2,
  FRACEVO_STATUS_DIMENSION = 3,
  FRACEVO_STATUS_NON_CONVERGENCE = 4,
  FRACEVO_STATUS_GRID_TOO_COARSE = 5,
  FRACEVO_STATUS_NON_FINITE = 6,
  FRACEVO_STATUS_BLOW_UP_AMBIGUOUS = 7,
  FRACEVO_STATUS_IO = 8,
  FRACEVO_STATUS_PANIC = 9,
} FracevoStatus;

/**
 * Spectral operator `A`.
 */
typedef struct FracevoOperator FracevoOperator;

/**
 * Cauchy problem `D_t^α(u − u₀) + Au + B(u) = f` with constant `f`.
 */
typedef struct FracevoProblem FracevoProblem;

/**
 * Sampled trajectory in the coefficient basis of the operator.
 */
typedef struct FracevoTrajectory FracevoTrajectory;

/**
 * Outcome of [`fracevo_continue`].
 */
typedef struct FracevoContinuation {
  /**
   * 1 when blow-up was detected, 0 when the horizon was reached.
   */
  int32_t blew_up;
  /**
   * Blow-up time estimate and bracket; NaN when `blew_up` is 0.
   */
  double t_star;
  double lower;
  double upper;
  double t_reached;
  double final_norm;
  size_t windows;
} FracevoContinuation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next call on the same thread.
 */
const char *fracevo_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *fracevo_version(void);

/**
 * Diagonal operator with the given positive eigenvalues.
 *
 * # Safety
 * `eigenvalues` must point to `n` doubles; `out` must be writable.
 */
enum FracevoStatus fracevo_operator_diagonal(const double *eigenvalues,
                                             size_t n,
                                             struct FracevoOperator **out);

/**
 * Dirichlet Laplacian on `(0, length)` truncated to `modes` sine modes.
 *
 * # Safety
 * `out` must be writable.
 */
enum FracevoStatus fracevo_operator_laplacian(size_t modes,
                                              double length,
                                              struct FracevoOperator **out);

/**
 * Number of modes; 0 for NULL.
 *
 * # Safety
 * `op` must be NULL or a live operator handle.
 */
size_t fracevo_operator_dim(const struct FracevoOperator *op);

/**
 * Copy the eigenvalues into `buf` of length `len` (must equal the dimension).
 *
 * # Safety
 * `op` must be a live handle and `buf` must hold `len` doubles.
 */
enum FracevoStatus fracevo_operator_eigenvalues(const struct FracevoOperator *op,
                                                double *buf,
                                                size_t len);

/**
 * Release an operator; NULL is ignored.
 *
 * # Safety
 * `op` must be NULL or a handle not yet freed.
 */
void fracevo_operator_free(struct FracevoOperator *op);

/**
 * Problem on `op` with order `alpha`, initial coefficients `u0[n]`, constant
 * forcing coefficients `forcing[n]` (NULL for zero) and nonlinearity
 * `kind` with `coefficient`. A positive `truncation_radius` replaces a
 * locally Lipschitz nonlinearity by its radial truncation, which the
 * fixed-horizon solver requires.
 *
 * # Safety
 * Pointers must be valid for `n` doubles; `op` must be a live handle.
 */
enum FracevoStatus fracevo_problem_new(const struct FracevoOperator *op,
                                       double alpha,
                                       const double *u0,
                                       size_t n,
                                       const double *forcing,
                                       enum FracevoNonlinearity kind,
                                       double coefficient,
                                       double truncation_radius,
                                       struct FracevoProblem **out);

/**
 * Release a problem; NULL is ignored.
 *
 * # Safety
 * `p` must be NULL or a handle not yet freed.
 */
void fracevo_problem_free(struct FracevoProblem *p);

/**
 * Solve on the graded grid `t_i = t_end (i/nodes)^grading`; a non-positive
 * `grading` selects `(2 − α)/α`. Problems without a nonlinearity use the
 * direct linear solver, others the windowed Picard solver.
 *
 * # Safety
 * `p` must be a live handle and `out` writable.
 */
enum FracevoStatus fracevo_solve(const struct FracevoProblem *p,
                                 double t_end,
                                 size_t nodes,
                                 double grading,
                                 struct FracevoTrajectory **out);

/**
 * Continue the solution up to `horizon` with adaptive truncation and report
 * blow-up. `trajectory` may be NULL when the samples are not needed.
 *
 * # Safety
 * `p` must be a live handle, `result` writable, `trajectory` NULL or writable.
 */
enum FracevoStatus fracevo_continue(const struct FracevoProblem *p,
                                    double horizon,
                                    struct FracevoContinuation *result,
                                    struct FracevoTrajectory **trajectory);

/**
 * Number of time nodes; 0 for NULL.
 *
 * # Safety
 * `u` must be NULL or a live handle.
 */
size_t fracevo_trajectory_len(const struct FracevoTrajectory *u);

/**
 * State dimension; 0 for NULL.
 *
 * # Safety
 * `u` must be NULL or a live handle.
 */
size_t fracevo_trajectory_dim(const struct FracevoTrajectory *u);

/**
 * Copy the time nodes into `buf` of length `len` (must equal the node count).
 *
 * # Safety
 * `u` must be a live handle and `buf` must hold `len` doubles.
 */
enum FracevoStatus fracevo_trajectory_times(const struct FracevoTrajectory *u,
                                            double *buf,
                                            size_t len);

/**
 * Copy the values, node-major (`len · dim` doubles), into `buf`.
 *
 * # Safety
 * `u` must be a live handle and `buf` must hold `len` doubles.
 */
enum FracevoStatus fracevo_trajectory_values(const struct FracevoTrajectory *u,
                                             double *buf,
                                             size_t len);

/**
 * Release a trajectory; NULL is ignored.
 *
 * # Safety
 * `u` must be NULL or a handle not yet freed.
 */
void fracevo_trajectory_free(struct FracevoTrajectory *u);

/**
 * `E_{a,b}(−x) = Σ (−x)^k/Γ(ak + b)` for `0 < a < 1`, `x ≥ 0`.
 *
 * # Safety
 * `out` must be writable.
 */
enum FracevoStatus fracevo_mittag_leffler_neg(double a, double b, double x, double *out);

/**
 * Validate and run a TOML run configuration, writing artifacts to `out_dir`.
 * Validation failures return `InvalidArgument` with every violation in the
 * error message.
 *
 * # Safety
 * Both arguments must be NUL-terminated strings.
 */
enum FracevoStatus fracevo_run_config(const char *config_toml, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACEVO_H */
