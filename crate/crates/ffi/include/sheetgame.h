#ifndef SHEETGAME_H
#define SHEETGAME_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum SgStatus {
  SG_STATUS_OK = 0,
  SG_STATUS_NULL_POINTER = 1,
  SG_STATUS_INVALID_ARGUMENT = 2,
  SG_STATUS_CONTRACT = 3,
  SG_STATUS_NUMERICAL = 4,
  SG_STATUS_CONVERGENCE = 5,
  SG_STATUS_UNSUPPORTED = 6,
  SG_STATUS_IO = 7,
  SG_STATUS_PANIC = 8,
} SgStatus;

typedef enum SgExample1Strategy {
  SG_EXAMPLE1_STRATEGY_REDUCED = 0,
  SG_EXAMPLE1_STRATEGY_BEST_RESPONSE = 1,
} SgExample1Strategy;

typedef enum SgExample2Kind {
  SG_EXAMPLE2_KIND_DISPLAYED = 0,
  SG_EXAMPLE2_KIND_QUADRANT = 1,
} SgExample2Kind;

typedef enum SgMeanField {
  SG_MEAN_FIELD_U1 = 0,
  SG_MEAN_FIELD_U2 = 1,
  SG_MEAN_FIELD_STATE = 2,
  SG_MEAN_FIELD_P1 = 3,
  SG_MEAN_FIELD_P2 = 4,
} SgMeanField;

/**
 * Opaque equilibrium solution.
 */
typedef struct SgEquilibrium SgEquilibrium;

/**
 * Opaque sheet ensemble.
 */
typedef struct SgSheetEnsemble SgSheetEnsemble;

typedef struct SgGrid {
  double t_max;
  double x_max;
  uint32_t nt;
  uint32_t nx;
} SgGrid;

typedef struct SgWellposedness {
  bool well_posed;
  double r0;
  double margin_k1;
  double margin_k2;
} SgWellposedness;

typedef struct SgExample1Params {
  double a1;
  double a2;
  double c1;
  double c2;
  double sigma;
  double y0;
} SgExample1Params;

typedef struct SgBilinear {
  double c0;
  double ct;
  double cx;
  double ctx;
} SgBilinear;

typedef struct SgExample2Params {
  double alpha1;
  double alpha2;
  double beta1;
  double beta2;
  struct SgBilinear sigma;
  struct SgBilinear source;
  double y0;
} SgExample2Params;

/**
 * `star_sign` and `p_sign` are read only for [`SgExample2Kind::Displayed`].
 */
typedef struct SgExample2Variant {
  enum SgExample2Kind kind;
  double star_sign;
  double p_sign;
} SgExample2Variant;

typedef struct SgCosts {
  double j1;
  double j1_stderr;
  double j2;
  double j2_stderr;
} SgCosts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *sg_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sg_version(void);

/**
 * Sample `n_paths` sheet paths on `grid`.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum SgStatus sg_sheet_sample(struct SgGrid grid,
                              uint64_t seed,
                              size_t n_paths,
                              struct SgSheetEnsemble **out);

/**
 * `B(t_i, x_j)` on path `path`.
 *
 * # Safety
 * `ens` must come from [`sg_sheet_sample`]; `out` must be writable.
 */
enum SgStatus sg_sheet_value(const struct SgSheetEnsemble *ens,
                             size_t path,
                             uint32_t i,
                             uint32_t j,
                             double *out);

/**
 * Number of paths held by `ens` (0 for a null handle).
 *
 * # Safety
 * `ens` must be null or come from [`sg_sheet_sample`].
 */
size_t sg_sheet_n_paths(const struct SgSheetEnsemble *ens);

/**
 * # Safety
 * `ens` must be null or a handle not yet freed.
 */
void sg_sheet_free(struct SgSheetEnsemble *ens);

/**
 * 1 when `t1 <= t2` and `x1 >= x2`, else 0.
 */
int32_t sg_indicator_wedge(double t1, double x1, double t2, double x2);

/**
 * Smallest positive root of `J₀(2√t)`.
 */
double sg_bessel_r0(void);

/**
 * # Safety
 * `out` must be writable.
 */
enum SgStatus sg_wellposedness(double k1, double k2, double area, struct SgWellposedness *out);

/**
 * Reduced coefficients `(alpha, beta, ratio)` of Example 1.
 *
 * # Safety
 * The three output pointers must be writable.
 */
enum SgStatus sg_example1_reduction(struct SgExample1Params params,
                                    double *alpha,
                                    double *beta,
                                    double *ratio);

/**
 * Solve Example 1.
 *
 * # Safety
 * `out` must be writable.
 */
enum SgStatus sg_example1_solve(struct SgExample1Params params,
                                enum SgExample1Strategy strategy,
                                struct SgGrid grid,
                                uint64_t seed,
                                size_t n_paths,
                                bool check_nash,
                                struct SgEquilibrium **out);

/**
 * Solve Example 2.
 *
 * # Safety
 * `out` must be writable.
 */
enum SgStatus sg_example2_solve(struct SgExample2Params params,
                                struct SgExample2Variant variant,
                                struct SgGrid grid,
                                uint64_t seed,
                                size_t n_paths,
                                bool check_nash,
                                struct SgEquilibrium **out);

/**
 * Number of grid nodes, the length expected by [`sg_equilibrium_mean_field`].
 *
 * # Safety
 * `eq` must be null or a live handle.
 */
size_t sg_equilibrium_n_nodes(const struct SgEquilibrium *eq);

/**
 * Copy the node-wise mean of `which` into `out[0..len]`, node index
 * `i * (nx + 1) + j`.
 *
 * # Safety
 * `eq` must be a live handle and `out` must hold `len` doubles.
 */
enum SgStatus sg_equilibrium_mean_field(const struct SgEquilibrium *eq,
                                        enum SgMeanField which,
                                        double *out,
                                        size_t len);

/**
 * # Safety
 * `eq` must be a live handle and `out` writable.
 */
enum SgStatus sg_equilibrium_costs(const struct SgEquilibrium *eq, struct SgCosts *out);

/**
 * 1 if the deviation check passed, 0 if it failed, -1 if it was not run
 * (or `eq` is null).
 *
 * # Safety
 * `eq` must be null or a live handle.
 */
int32_t sg_equilibrium_nash_pass(const struct SgEquilibrium *eq);

/**
 * Picard iterations used by the solver.
 *
 * # Safety
 * `eq` must be null or a live handle.
 */
size_t sg_equilibrium_iterations(const struct SgEquilibrium *eq);

/**
 * # Safety
 * `eq` must be null or a handle not yet freed.
 */
void sg_equilibrium_free(struct SgEquilibrium *eq);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SHEETGAME_H */
