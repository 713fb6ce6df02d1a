#ifndef WEIGHTED_BLOWUP_H
#define WEIGHTED_BLOWUP_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum WbChart {
  WB_CHART_LOWER = 0,
  WB_CHART_UPPER = 1,
  WB_CHART_BAR_Z = 2,
} WbChart;

typedef enum WbProfileKind {
  WB_PROFILE_KIND_P1 = 0,
  WB_PROFILE_KIND_P2_CASE1 = 1,
  WB_PROFILE_KIND_P2_CASE2 = 2,
} WbProfileKind;

typedef enum WbStatus {
  WB_STATUS_OK = 0,
  WB_STATUS_NULL_POINTER = 1,
  /**
   * Exponents outside the admissible range.
   */
  WB_STATUS_DOMAIN = 2,
  WB_STATUS_INVALID_INPUT = 3,
  WB_STATUS_CONFIG = 4,
  /**
   * Integration failed (step size underflow, chart error).
   */
  WB_STATUS_NUMERIC = 5,
  WB_STATUS_BRACKET = 6,
  WB_STATUS_AMBIGUOUS_LIMIT = 7,
  WB_STATUS_CERTIFICATION = 8,
  WB_STATUS_INDEX_OUT_OF_RANGE = 9,
  WB_STATUS_PANIC = 10,
} WbStatus;

typedef enum WbTerminalClass {
  WB_TERMINAL_CLASS_ENTERS_PGAMMA0 = 0,
  WB_TERMINAL_CLASS_ENTERS_P1 = 1,
  WB_TERMINAL_CLASS_ENTERS_Q3 = 2,
  WB_TERMINAL_CLASS_Q4_DIAGNOSTIC = 3,
  WB_TERMINAL_CLASS_UNRESOLVED = 4,
} WbTerminalClass;

/**
 * Integrator settings.
 */
typedef struct WbConfig WbConfig;

/**
 * A forward orbit with its terminal class.
 */
typedef struct WbOrbit WbOrbit;

/**
 * Exponents of one problem instance.
 */
typedef struct WbParams WbParams;

/**
 * A good profile found by shooting.
 */
typedef struct WbProfile WbProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *wb_version(void);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t wb_last_error(char *buf, size_t len);

/**
 * Validates `1 < p < m`, `sigma > 0` and derives the similarity exponents.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WbStatus wb_params_new(double m, double p, double sigma, struct WbParams **out);

/**
 * As [`wb_params_new`], optionally admitting the reference cases `p = 1` and `sigma = 0`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum WbStatus wb_params_new_validation(double m,
                                       double p,
                                       double sigma,
                                       bool allow_p_one,
                                       bool allow_sigma_zero,
                                       struct WbParams **out);

/**
 * # Safety
 * `params` must come from `wb_params_new*` and not be used afterwards.
 */
void wb_params_free(struct WbParams *params);

/**
 * `alpha` and `beta` of the similarity variables.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WbStatus wb_params_exponents(const struct WbParams *params, double *alpha, double *beta);

/**
 * Default integrator settings.
 */
struct WbConfig *wb_config_new(void);

/**
 * # Safety
 * `config` must come from `wb_config_new` and not be used afterwards.
 */
void wb_config_free(struct WbConfig *config);

/**
 * Sets the relative and absolute step tolerances.
 *
 * # Safety
 * `config` must be valid.
 */
enum WbStatus wb_config_set_tolerances(struct WbConfig *config, double rel_tol, double abs_tol);

/**
 * Sets the system-time budget and the step count limit.
 *
 * # Safety
 * `config` must be valid.
 */
enum WbStatus wb_config_set_budget(struct WbConfig *config, double max_arc, size_t max_steps);

/**
 * Shoots from the interface over a default bracket and bisects to `tol_eta`.
 *
 * # Safety
 * Pointers must be valid; `config` may be null for defaults.
 */
enum WbStatus wb_profile_find(const struct WbParams *params,
                              const struct WbConfig *config,
                              double tol_eta,
                              struct WbProfile **out);

/**
 * # Safety
 * `profile` must come from `wb_profile_find` and not be used afterwards.
 */
void wb_profile_free(struct WbProfile *profile);

/**
 * Kind, interface point and (for `P1`) the value at the origin; `a0` is NaN otherwise.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WbStatus wb_profile_summary(const struct WbProfile *profile,
                                 enum WbProfileKind *kind,
                                 double *eta0,
                                 double *a0);

/**
 * Number of profile samples.
 *
 * # Safety
 * `profile` must be valid or null (returns 0).
 */
size_t wb_profile_len(const struct WbProfile *profile);

/**
 * Sample `i`: `xi`, `f`, `f'` and `(f^m)'`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WbStatus wb_profile_sample(const struct WbProfile *profile,
                                size_t i,
                                double *xi,
                                double *f,
                                double *df,
                                double *fm_prime);

/**
 * The orbit leaving `P2` into the positive half-space.
 *
 * # Safety
 * Pointers must be valid; `config` may be null for defaults.
 */
enum WbStatus wb_orbit_from_p2(const struct WbParams *params,
                               const struct WbConfig *config,
                               struct WbOrbit **out);

/**
 * The member `Z ~ k X` of the family leaving `P0`; `k` must be positive.
 *
 * # Safety
 * Pointers must be valid; `config` may be null for defaults.
 */
enum WbStatus wb_orbit_from_p0(const struct WbParams *params,
                               double k,
                               const struct WbConfig *config,
                               struct WbOrbit **out);

/**
 * # Safety
 * `orbit` must come from `wb_orbit_from_*` and not be used afterwards.
 */
void wb_orbit_free(struct WbOrbit *orbit);

/**
 * Terminal class; `detail` is the interface point for `EntersP1`, the
 * sign-change point for `EntersQ3`, NaN otherwise.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WbStatus wb_orbit_terminal(const struct WbOrbit *orbit,
                                enum WbTerminalClass *class_,
                                double *detail);

/**
 * Number of stored states.
 *
 * # Safety
 * `orbit` must be valid or null (returns 0).
 */
size_t wb_orbit_len(const struct WbOrbit *orbit);

/**
 * State `i`: chart, three coordinates and `ln xi`.
 *
 * # Safety
 * Pointers must be valid; `coords` must hold 3 values.
 */
enum WbStatus wb_orbit_state(const struct WbOrbit *orbit,
                             size_t i,
                             enum WbChart *chart,
                             double *coords,
                             double *logxi);

/**
 * Bisects on `sigma` for the switch of the `P2` orbit from the tail attractor to a sign change.
 *
 * # Safety
 * Pointers must be valid; `config` may be null for defaults.
 */
enum WbStatus wb_find_sigma_star(double m,
                                 double p,
                                 double sigma_lo,
                                 double sigma_hi,
                                 double tol,
                                 const struct WbConfig *config,
                                 double *sigma_star,
                                 double *bracket_lo,
                                 double *bracket_hi);

/**
 * Closed-form profile for `p = 1`, `sigma = sqrt(2(m+1))`, at `xi`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum WbStatus wb_explicit_profile(double m, double xi, double *f, double *df, double *fm_prime);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEIGHTED_BLOWUP_H */
