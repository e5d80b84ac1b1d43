#ifndef EVFAIR_H
#define EVFAIR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Solver outcome of a run.
 */
typedef enum EvfSolveStatus {
  EVF_SOLVE_STATUS_OPTIMAL = 0,
  EVF_SOLVE_STATUS_FEASIBLE = 1,
  EVF_SOLVE_STATUS_INFEASIBLE = 2,
  EVF_SOLVE_STATUS_NODE_LIMIT = 3,
} EvfSolveStatus;

/**
 * Result code of every fallible call.
 */
typedef enum EvfStatus {
  EVF_STATUS_OK = 0,
  EVF_STATUS_NULL_ARGUMENT = 1,
  EVF_STATUS_INVALID_UTF8 = 2,
  EVF_STATUS_INVALID_ARGUMENT = 3,
  EVF_STATUS_PARSE_ERROR = 4,
  EVF_STATUS_VALIDATION_ERROR = 5,
  EVF_STATUS_IO_ERROR = 6,
  EVF_STATUS_INFEASIBLE = 7,
  EVF_STATUS_SOLVER_ERROR = 8,
  EVF_STATUS_PANIC = 9,
} EvfStatus;

/**
 * The result of one solve.
 */
typedef struct EvfRun EvfRun;

/**
 * A validated scenario.
 */
typedef struct EvfScenario EvfScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a scenario from a JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EvfStatus evf_scenario_from_json(const char *json, struct EvfScenario **out);

/**
 * Loads a scenario JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EvfStatus evf_scenario_load(const char *path, struct EvfScenario **out);

/**
 * Generates a synthetic scenario.
 *
 * `case_name` is `residential` or `shopping`. Pass a negative `n_fixed`,
 * `n_random` or a non-positive `slot_hours` to keep the case default.
 *
 * # Safety
 * `case_name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum EvfStatus evf_scenario_generate(const char *case_name,
                                     uint64_t seed,
                                     int64_t n_fixed,
                                     int64_t n_random,
                                     double slot_hours,
                                     struct EvfScenario **out);

/**
 * Sets the operating mode: `charging-only`, `v2g` or `joint`.
 *
 * # Safety
 * `scenario` must come from this library; `mode` must be a NUL-terminated string.
 */
enum EvfStatus evf_scenario_set_mode(struct EvfScenario *scenario, const char *mode);

/**
 * Sets the fairness policy from a flag such as `hard:2.5` or `budget:1,4`.
 *
 * # Safety
 * `scenario` must come from this library; `policy` must be a NUL-terminated string.
 */
enum EvfStatus evf_scenario_set_fairness(struct EvfScenario *scenario, const char *policy);

/**
 * Number of EVs, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or come from this library.
 */
size_t evf_scenario_ev_count(const struct EvfScenario *scenario);

/**
 * Number of time slots, or 0 for a null handle.
 *
 * # Safety
 * `scenario` must be null or come from this library.
 */
size_t evf_scenario_slot_count(const struct EvfScenario *scenario);

/**
 * Serializes the scenario as JSON. Free the result with [`evf_string_free`].
 *
 * # Safety
 * `scenario` must come from this library and `out` be a valid pointer.
 */
enum EvfStatus evf_scenario_to_json(const struct EvfScenario *scenario, char **out);

/**
 * # Safety
 * `scenario` must be null or come from this library, and not be used afterwards.
 */
void evf_scenario_free(struct EvfScenario *scenario);

/**
 * Solves the scenario under its current mode and fairness policy.
 *
 * `method` is `exact`, `heuristic`, `auto` or null for the scenario's own
 * setting. A non-positive `gap_tol` keeps the configured tolerance.
 *
 * # Safety
 * `scenario` must come from this library, `method` must be null or a
 * NUL-terminated string and `out` a valid pointer.
 */
enum EvfStatus evf_solve(const struct EvfScenario *scenario,
                         const char *method,
                         double gap_tol,
                         struct EvfRun **out);

/**
 * Solver outcome, `Infeasible` for a null handle.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
enum EvfSolveStatus evf_run_status(const struct EvfRun *run);

/**
 * Objective value, NaN for a null handle.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
double evf_run_objective(const struct EvfRun *run);

/**
 * Relative optimality gap, NaN for a null handle.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
double evf_run_rel_gap(const struct EvfRun *run);

/**
 * Fleet total cost from the per-EV breakdown, NaN for a null handle.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
double evf_run_total_cost(const struct EvfRun *run);

/**
 * Jain's fairness index of V2V participation, NaN for a null handle.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
double evf_run_jfi(const struct EvfRun *run);

/**
 * Whether the independent feasibility audit passed.
 *
 * # Safety
 * `run` must be null or come from this library.
 */
bool evf_run_audit_pass(const struct EvfRun *run);

/**
 * Serializes the run (record, schedule, fairness and audit) as JSON.
 * Free the result with [`evf_string_free`].
 *
 * # Safety
 * `run` must come from this library and `out` be a valid pointer.
 */
enum EvfStatus evf_run_to_json(const struct EvfRun *run, char **out);

/**
 * # Safety
 * `run` must be null or come from this library, and not be used afterwards.
 */
void evf_run_free(struct EvfRun *run);

/**
 * # Safety
 * `s` must be null or a string returned by this library, and not be used afterwards.
 */
void evf_string_free(char *s);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *evf_last_error(void);

/**
 * Library version as a static string.
 */
const char *evf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EVFAIR_H */
