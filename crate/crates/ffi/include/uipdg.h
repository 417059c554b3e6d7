#ifndef UIPDG_H
#define UIPDG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum UipdgTest {
  UIPDG_TEST_TEST1 = 0,
  UIPDG_TEST_KELLOGG = 1,
} UipdgTest;

typedef enum UipdgScheme {
  UIPDG_SCHEME_UIP = 0,
  UIPDG_SCHEME_SWIP = 1,
  UIPDG_SCHEME_IPF = 2,
} UipdgScheme;

/**
 * Status codes; the nonzero values match the command line exit codes where
 * they overlap.
 */
typedef enum UipdgStatus {
  UIPDG_STATUS_OK = 0,
  /**
   * A required pointer was null or a string was not valid UTF-8.
   */
  UIPDG_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Bad configuration or input data.
   */
  UIPDG_STATUS_CONFIG = 2,
  /**
   * The linear solver failed.
   */
  UIPDG_STATUS_SOLVER = 3,
  /**
   * A verification check failed.
   */
  UIPDG_STATUS_CHECK = 4,
  /**
   * The point lies outside the mesh.
   */
  UIPDG_STATUS_OUT_OF_DOMAIN = 5,
  /**
   * The caller's buffer is too small.
   */
  UIPDG_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A Rust panic was caught at the boundary.
   */
  UIPDG_STATUS_INTERNAL = 7,
} UipdgStatus;

/**
 * A discrete solution together with its mesh.
 */
typedef struct UipdgSolution UipdgSolution;

/**
 * Parameters of a benchmark solve.
 */
typedef struct UipdgSolveParams {
  enum UipdgTest test;
  /**
   * Anisotropy ratio of the first benchmark; ignored for Kellogg.
   */
  double lambda;
  enum UipdgScheme scheme;
  /**
   * -1, 0 or 1.
   */
  int8_t epsilon;
  /**
   * Polynomial degree, 1 to 4.
   */
  uint32_t degree;
  /**
   * Subdivisions per side of the structured mesh (even).
   */
  uint32_t n;
  double alpha0;
} UipdgSolveParams;

/**
 * Error norms of a solution against the benchmark's exact solution.
 */
typedef struct UipdgErrors {
  double h;
  size_t dofs;
  double err_l2;
  double err_grad;
  double err_jump;
  double err_energy;
  double err_trace;
  double err_augmented;
  double solver_residual;
} UipdgErrors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library; static storage, do not free.
 */
const char *uipdg_version(void);

/**
 * Parameters with the library defaults: first benchmark with
 * `lambda = 1`, symmetric UIP, degree 1, `n = 8`, `alpha0 = 8`.
 */
struct UipdgSolveParams uipdg_default_params(void);

/**
 * Solves a benchmark problem. On success `*out` receives a handle that
 * must be released with [`uipdg_solution_free`].
 *
 * # Safety
 * `params` must point to a valid parameter struct and `out` to writable
 * storage for one pointer.
 */
enum UipdgStatus uipdg_solve(const struct UipdgSolveParams *params, struct UipdgSolution **out);

/**
 * Releases a solution handle. Null is accepted and ignored.
 *
 * # Safety
 * `sol` must be null or a handle returned by [`uipdg_solve`] that has not
 * been freed yet.
 */
void uipdg_solution_free(struct UipdgSolution *sol);

/**
 * Number of unknowns of the solution.
 *
 * # Safety
 * `sol` must be a live handle or null (returns 0).
 */
size_t uipdg_solution_num_dofs(const struct UipdgSolution *sol);

/**
 * Copies the error norms into `*out`.
 *
 * # Safety
 * `sol` must be a live handle and `out` writable.
 */
enum UipdgStatus uipdg_solution_errors(const struct UipdgSolution *sol, struct UipdgErrors *out);

/**
 * Copies the coefficient vector (element-major, `n_loc` per element) into
 * `buf`. Fails with `BufferTooSmall` if `len` is less than the number of
 * unknowns.
 *
 * # Safety
 * `sol` must be a live handle and `buf` must point to `len` writable doubles.
 */
enum UipdgStatus uipdg_solution_coefficients(const struct UipdgSolution *sol,
                                             double *buf,
                                             size_t len);

/**
 * Evaluates the discrete solution at `(x, y)`.
 *
 * # Safety
 * `sol` must be a live handle and `value` writable.
 */
enum UipdgStatus uipdg_solution_eval(const struct UipdgSolution *sol,
                                     double x,
                                     double y,
                                     double *value);

/**
 * Estimated convergence rate between two levels; `NaN` when undefined.
 */
double uipdg_ecr(double e_coarse, double e_fine, double h_coarse, double h_fine);

/**
 * Runs a command line subcommand (`run`, `convergence`, `compare`,
 * `equivalence` or `mesh`) on a JSON config file and returns its exit
 * code. `out_dir` may be null to use the config's output directory.
 *
 * # Safety
 * `command` and `config_path` must be nul-terminated strings; `out_dir`
 * must be null or nul-terminated.
 */
int32_t uipdg_run_command(const char *command, const char *config_path, const char *out_dir);

/**
 * Message of the last failed call on this thread (empty after a success).
 * Copies at most `len - 1` bytes plus a terminating nul into `buf` and
 * returns the full message length.
 *
 * # Safety
 * `buf` must be null (to query the length) or point to `len` writable bytes.
 */
size_t uipdg_last_error(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* UIPDG_H */
