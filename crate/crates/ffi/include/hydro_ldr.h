#ifndef HYDRO_LDR_H
#define HYDRO_LDR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Values 2 to 4 match the CLI exit codes.
 */
typedef enum HldrStatus {
  HLDR_STATUS_OK = 0,
  /**
   * Null pointer, bad UTF-8 or out-of-range index.
   */
  HLDR_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Invalid configuration or data.
   */
  HLDR_STATUS_CONFIG = 2,
  /**
   * The LP solver failed or reported infeasibility.
   */
  HLDR_STATUS_LP = 3,
  HLDR_STATUS_IO = 4,
  HLDR_STATUS_PANIC = 5,
} HldrStatus;

typedef struct HldrPolicy HldrPolicy;

typedef struct HldrScenarios HldrScenarios;

typedef struct HldrSimulation HldrSimulation;

typedef struct HldrSystem HldrSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *hldr_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hldr_version(void);

/**
 * Loads a system file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HldrStatus hldr_system_load(const char *path, struct HldrSystem **out);

/**
 * Loads the system of a bundled fixture (`case1`, `case2`, `micro`).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `out` must be writable.
 */
enum HldrStatus hldr_system_fixture(const char *name, struct HldrSystem **out);

/**
 * # Safety
 * `system` must be null or a handle not yet freed.
 */
void hldr_system_free(struct HldrSystem *system);

/**
 * Number of stages, or 0 for a null handle.
 *
 * # Safety
 * `system` must be null or a live handle.
 */
size_t hldr_system_horizon(const struct HldrSystem *system);

/**
 * Number of reservoirs, or 0 for a null handle.
 *
 * # Safety
 * `system` must be null or a live handle.
 */
size_t hldr_system_n_hydros(const struct HldrSystem *system);

/**
 * Loads a scenario CSV.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HldrStatus hldr_scenarios_load(const char *path, struct HldrScenarios **out);

/**
 * Draws `n` scenarios from a scenario spec file, or from the spec of a
 * bundled fixture when `spec` is `fixture:<name>`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum HldrStatus hldr_scenarios_generate(const char *spec,
                                        size_t n,
                                        size_t horizon,
                                        size_t max_lag,
                                        uint64_t seed,
                                        struct HldrScenarios **out);

/**
 * Writes a scenario CSV.
 *
 * # Safety
 * `scenarios` must be a live handle; `path` a NUL-terminated string.
 */
enum HldrStatus hldr_scenarios_save(const struct HldrScenarios *scenarios, const char *path);

/**
 * # Safety
 * `scenarios` must be null or a handle not yet freed.
 */
void hldr_scenarios_free(struct HldrScenarios *scenarios);

/**
 * Number of scenarios, or 0 for a null handle.
 *
 * # Safety
 * `scenarios` must be null or a live handle.
 */
size_t hldr_scenarios_count(const struct HldrScenarios *scenarios);

/**
 * Estimates a policy. With `lambda > 0`, `baseline` must be the λ = 0
 * policy that defines the adaptive weights; it is ignored otherwise.
 * `objective` receives the LP objective when non-null.
 *
 * # Safety
 * Handles must be live (`baseline` may be null when `lambda == 0`);
 * `out` must be writable; `objective` must be null or writable.
 */
enum HldrStatus hldr_estimate(const struct HldrSystem *system,
                              const struct HldrScenarios *scenarios,
                              size_t max_degree,
                              size_t max_lag,
                              bool include_complement,
                              double lambda,
                              const struct HldrPolicy *baseline,
                              struct HldrPolicy **out,
                              double *objective);

/**
 * Loads a policy CSV and its JSON sidecar.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum HldrStatus hldr_policy_load(const char *path, struct HldrPolicy **out);

/**
 * Writes a policy CSV and its JSON sidecar.
 *
 * # Safety
 * `policy` must be a live handle; `path` a NUL-terminated string.
 */
enum HldrStatus hldr_policy_save(const struct HldrPolicy *policy, const char *path);

/**
 * # Safety
 * `policy` must be null or a handle not yet freed.
 */
void hldr_policy_free(struct HldrPolicy *policy);

/**
 * Total coefficient count, or 0 for a null handle.
 *
 * # Safety
 * `policy` must be null or a live handle.
 */
size_t hldr_policy_n_coefficients(const struct HldrPolicy *policy);

/**
 * Non-intercept coefficients above the zero tolerance, or 0 for a null
 * handle.
 *
 * # Safety
 * `policy` must be null or a live handle.
 */
size_t hldr_policy_nonzero_count(const struct HldrPolicy *policy);

/**
 * Copies up to `len` coefficients, in canonical index order, into `buf`
 * and stores the total count in `written`.
 *
 * # Safety
 * `policy` must be live; `buf` must hold `len` doubles; `written` must be
 * writable.
 */
enum HldrStatus hldr_policy_theta(const struct HldrPolicy *policy,
                                  double *buf,
                                  size_t len,
                                  size_t *written);

/**
 * Simulates a policy over every scenario. `gamma <= 0` selects the default
 * tracking penalty.
 *
 * # Safety
 * Handles must be live; `out` must be writable.
 */
enum HldrStatus hldr_simulate(const struct HldrSystem *system,
                              const struct HldrPolicy *policy,
                              const struct HldrScenarios *scenarios,
                              double gamma,
                              struct HldrSimulation **out);

/**
 * # Safety
 * `sim` must be null or a handle not yet freed.
 */
void hldr_simulation_free(struct HldrSimulation *sim);

/**
 * Mean discounted cost, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double hldr_simulation_mean_cost(const struct HldrSimulation *sim);

/**
 * Discounted cost of scenario `s` (0-based).
 *
 * # Safety
 * `sim` must be live; `cost` must be writable.
 */
enum HldrStatus hldr_simulation_cost(const struct HldrSimulation *sim, size_t s, double *cost);

/**
 * Spot price at bus `bus` for scenario `s` and stage `t` (0-based `s` and
 * `bus`, 1-based `t`).
 *
 * # Safety
 * `sim` must be live; `price` must be writable.
 */
enum HldrStatus hldr_simulation_spot(const struct HldrSimulation *sim,
                                     size_t s,
                                     size_t t,
                                     size_t bus,
                                     double *price);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYDRO_LDR_H */
