#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Return code for every fallible entry point.
 */
typedef enum BlindsrCode {
  BlindsrCode_Ok = 0,
  BlindsrCode_InvalidArgument = 1,
  BlindsrCode_Numerical = 2,
  BlindsrCode_Solver = 3,
  BlindsrCode_Config = 4,
  BlindsrCode_DegenerateSpectrum = 5,
  BlindsrCode_Io = 6,
  BlindsrCode_Serde = 7,
  BlindsrCode_NullPointer = 8,
  BlindsrCode_Utf8 = 9,
  BlindsrCode_Panic = 10,
} BlindsrCode;

/**
 * Recovery method selector.
 */
typedef enum BlindsrMethod {
  BlindsrMethod_Pswf = 0,
  BlindsrMethod_Baseline = 1,
} BlindsrMethod;

/**
 * Solver termination status as reported in a solution handle.
 */
typedef enum BlindsrStatus {
  BlindsrStatus_Optimal = 0,
  BlindsrStatus_NearOptimal = 1,
  BlindsrStatus_Infeasible = 2,
  BlindsrStatus_Unbounded = 3,
  BlindsrStatus_NumericalFailure = 4,
} BlindsrStatus;

/**
 * Opaque: prolate basis for one (B_max, eps) pair.
 */
typedef struct BlindsrBasis BlindsrBasis;

/**
 * Opaque: one problem instance (ground truth, sampling scheme, data).
 */
typedef struct BlindsrInstance BlindsrInstance;

/**
 * Opaque: result of solving one instance with one method.
 */
typedef struct BlindsrSolution BlindsrSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message for this thread into `buf` (NUL-terminated,
 * truncated to `len` bytes). Returns the full message length in bytes,
 * excluding the terminator. `buf` may be NULL to query the length.
 */
size_t blindsr_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *blindsr_version(void);

/**
 * Build the prolate basis for bandwidth `b_max` at accuracy `eps`
 * (pass eps <= 0 for the default 1e-10). When `cache_dir` is non-NULL the
 * basis is loaded from / saved to that directory.
 */
enum BlindsrCode blindsr_basis_build(double b_max,
                                     double eps,
                                     const char *cache_dir,
                                     struct BlindsrBasis **out);

void blindsr_basis_free(struct BlindsrBasis *basis);

/**
 * Truncation order d; the basis spans 2d+1 functions.
 */
size_t blindsr_basis_order(const struct BlindsrBasis *basis);

/**
 * Evaluate all 2d+1 basis functions at `t` in [-1, 1]. `values` must hold
 * at least 2d+1 doubles.
 */
enum BlindsrCode blindsr_basis_evaluate(const struct BlindsrBasis *basis,
                                        double t,
                                        double *values,
                                        size_t len);

/**
 * Draw a random instance: `k` spikes, `l`-dimensional calibration subspace,
 * `m` frequencies up to `b_max`, pairwise spike separation at least
 * `min_sep`, noise at `snr_db` (pass INFINITY for noiseless), seeded by
 * `seed`. `uniform_grid` nonzero places the frequencies on an equispaced
 * grid (required by the baseline method).
 */
enum BlindsrCode blindsr_instance_generate(size_t k,
                                           size_t l,
                                           size_t m,
                                           double b_max,
                                           double min_sep,
                                           double snr_db,
                                           uint64_t seed,
                                           int uniform_grid,
                                           struct BlindsrInstance **out);

/**
 * Load an instance from a JSON file produced by `blindsr_instance_write`
 * or the CLI `generate` subcommand.
 */
enum BlindsrCode blindsr_instance_read(const char *path, struct BlindsrInstance **out);

enum BlindsrCode blindsr_instance_write(const struct BlindsrInstance *inst, const char *path);

void blindsr_instance_free(struct BlindsrInstance *inst);

/**
 * Problem dimensions of an instance. NULL out-pointers are skipped.
 */
enum BlindsrCode blindsr_instance_dims(const struct BlindsrInstance *inst,
                                       size_t *k,
                                       size_t *l,
                                       size_t *m);

/**
 * Solve `inst` with `method` and score against the instance's ground truth.
 * `basis` is required for `BLINDSR_METHOD_PSWF` and ignored by the baseline.
 * Pass `tol_gap` <= 0 and/or `tol_rank` <= 0 for the defaults (1e-8, 1e-6).
 */
enum BlindsrCode blindsr_solve(const struct BlindsrInstance *inst,
                               const struct BlindsrBasis *basis,
                               enum BlindsrMethod method,
                               double tol_gap,
                               double tol_rank,
                               struct BlindsrSolution **out);

void blindsr_solution_free(struct BlindsrSolution *sol);

enum BlindsrStatus blindsr_solution_status(const struct BlindsrSolution *sol);

/**
 * Nonzero when the iterate is accurate enough to use.
 */
int blindsr_solution_usable(const struct BlindsrSolution *sol);

/**
 * Nonzero when the recovered spikes match the ground truth in number and
 * every location error is below the success threshold.
 */
int blindsr_solution_success(const struct BlindsrSolution *sol);

double blindsr_solution_objective(const struct BlindsrSolution *sol);

/**
 * Relative squared reconstruction error against the ground-truth lift.
 */
double blindsr_solution_nmse(const struct BlindsrSolution *sol);

/**
 * Largest matched spike-location error (NaN when nothing was localized).
 */
double blindsr_solution_max_tau_err(const struct BlindsrSolution *sol);

double blindsr_solution_solve_ms(const struct BlindsrSolution *sol);

/**
 * Number of recovered spikes (0 when localization did not run).
 */
size_t blindsr_solution_num_spikes(const struct BlindsrSolution *sol);

/**
 * Copy recovered spike locations (and masses, when `masses` is non-NULL)
 * into caller buffers of capacity `len`. Returns the spike count written.
 */
size_t blindsr_solution_spikes(const struct BlindsrSolution *sol,
                               double *taus,
                               double *masses,
                               size_t len);

/**
 * Copy the recovered lift Ẑ (M×L, row-major) into `re`/`im` buffers of
 * capacity `len` each. Returns the number of entries written.
 */
size_t blindsr_solution_z(const struct BlindsrSolution *sol, double *re, double *im, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
