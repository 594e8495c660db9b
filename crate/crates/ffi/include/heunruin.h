#ifndef HEUNRUIN_H
#define HEUNRUIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of every fallible call.
 */
typedef enum HrStatus {
  HrStatus_Ok = 0,
  /**
   * Bad pointer, malformed parameters, or out-of-domain argument.
   */
  HrStatus_InvalidArgument = 1,
  /**
   * gamma <= 1: the model has no nondegenerate survival probability.
   */
  HrStatus_DegenerateModel = 2,
  /**
   * Series seeding, ODE integration, or quadrature failed.
   */
  HrStatus_SolverFailed = 3,
  /**
   * Tail fit or normalization remainder check failed.
   */
  HrStatus_TailFailed = 4,
  HrStatus_IoFailed = 5,
  /**
   * An internal invariant broke; the library caught a panic.
   */
  HrStatus_Panic = 6,
} HrStatus;

/**
 * Opaque handle to a normalized solution.
 */
typedef struct HrSolution HrSolution;

/**
 * Solver options. Non-positive u_max or window bounds mean "automatic".
 */
typedef struct HrSolveOptions {
  double tol;
  double u_max;
  double remainder_cap;
  double fit_window_lo;
  double fit_window_hi;
  double spread_cap;
  bool auto_extend;
  uint32_t max_extensions;
} HrSolveOptions;

/**
 * Monte Carlo configuration. Non-positive safe_barrier means "automatic".
 */
typedef struct HrMcConfig {
  uint64_t n_paths;
  double dt;
  double horizon;
  uint64_t seed;
  double safe_barrier;
} HrMcConfig;

/**
 * Model parameters (money and time units as in the library).
 */
typedef struct HrModelParams {
  double lambda;
  double mu;
  double c;
  double r;
  double a;
  double sigma;
  double kappa;
} HrModelParams;

/**
 * Strategy-level derived quantities.
 */
typedef struct HrDerivedParams {
  double a_kappa;
  double sigma_kappa;
  double gamma;
  double beta;
  double nu;
} HrDerivedParams;

/**
 * Coefficients of the underlying doubly confluent Heun equation.
 */
typedef struct HrHeunParams {
  double a_h;
  double b_h;
  double c_h;
  double d_h;
} HrHeunParams;

/**
 * Tail-fit summary of a solution.
 */
typedef struct HrTailInfo {
  /**
   * Connection constant: H(u) ~ k1 (mu u)^{-gamma}.
   */
  double k1;
  double log_k1;
  double window_lo;
  double window_hi;
  double rel_spread;
  uint64_t n_nodes;
  /**
   * Ruin-tail constant: Psi(u) ~ k_ruin u^{-(gamma-1)}.
   */
  double k_ruin;
} HrTailInfo;

/**
 * Monte Carlo estimate with outcome counts.
 */
typedef struct HrMcResult {
  double u;
  double psi_hat;
  double std_err;
  uint64_t n_paths;
  uint64_t ruined;
  uint64_t survived_censored;
  uint64_t survived_early;
  uint64_t ruined_between_jumps;
} HrMcResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *hr_version(void);

/**
 * Message of the most recent failure on this thread, or NULL if none.
 * The pointer stays valid until the next failing call on this thread.
 */
const char *hr_last_error_message(void);

/**
 * Write default solver options to `out`.
 *
 * # Safety
 * `out` must point to writable memory for one `HrSolveOptions`.
 */
enum HrStatus hr_solve_options_default(struct HrSolveOptions *out);

/**
 * Write the default Monte Carlo configuration to `out`.
 *
 * # Safety
 * `out` must point to writable memory for one `HrMcConfig`.
 */
enum HrStatus hr_mc_config_default(struct HrMcConfig *out);

/**
 * Validate `params` and write the derived strategy quantities to `out`.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum HrStatus hr_derive(const struct HrModelParams *params, struct HrDerivedParams *out);

/**
 * Validate `params` and write the Heun-equation coefficients to `out`.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
enum HrStatus hr_heun_params(const struct HrModelParams *params, struct HrHeunParams *out);

/**
 * Run the full pipeline and store a heap-allocated solution handle in
 * `*out`. Pass NULL `opts` for defaults. On failure `*out` is untouched.
 *
 * # Safety
 * `params` and `out` must be valid; `opts` may be NULL. The handle written
 * to `*out` must be released with [`hr_solution_free`].
 */
enum HrStatus hr_solve(const struct HrModelParams *params,
                       const struct HrSolveOptions *opts,
                       struct HrSolution **out);

/**
 * Release a solution handle. NULL is a no-op.
 *
 * # Safety
 * `sol` must be NULL or a pointer obtained from [`hr_solve`], released at
 * most once.
 */
void hr_solution_free(struct HrSolution *sol);

/**
 * Survival probability Phi(u).
 *
 * # Safety
 * `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
 */
enum HrStatus hr_phi(const struct HrSolution *sol, double u, double *out);

/**
 * Ruin probability Psi(u).
 *
 * # Safety
 * `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
 */
enum HrStatus hr_psi(const struct HrSolution *sol, double u, double *out);

/**
 * Phi(0) = C c / lambda.
 *
 * # Safety
 * `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
 */
enum HrStatus hr_phi0(const struct HrSolution *sol, double *out);

/**
 * Normalization constant C.
 *
 * # Safety
 * `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
 */
enum HrStatus hr_c_norm(const struct HrSolution *sol, double *out);

/**
 * Endpoint of the integrated density grid.
 *
 * # Safety
 * `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
 */
enum HrStatus hr_u_max(const struct HrSolution *sol, double *out);

/**
 * Signed residual of the integro-differential balance at u, convolution
 * integrated to absolute tolerance qtol.
 *
 * # Safety
 * `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
 */
enum HrStatus hr_ide_residual(const struct HrSolution *sol, double u, double qtol, double *out);

/**
 * Tail-fit summary of a solution.
 *
 * # Safety
 * `sol` must be a live handle from [`hr_solve`]; `out` must be writable.
 */
enum HrStatus hr_tail_info(const struct HrSolution *sol, struct HrTailInfo *out);

/**
 * Monte Carlo estimate of Psi(u). Pass NULL `cfg` for defaults.
 *
 * # Safety
 * `params` and `out` must be valid pointers; `cfg` may be NULL.
 */
enum HrStatus hr_estimate_psi(const struct HrModelParams *params,
                              double u,
                              const struct HrMcConfig *cfg,
                              struct HrMcResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HEUNRUIN_H */
