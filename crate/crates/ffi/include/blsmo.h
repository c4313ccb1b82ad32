#ifndef BLSMO_H
#define BLSMO_H

#include <stddef.h>
#include <stdint.h>

// Status codes; the non-zero library codes equal the CLI exit codes.
typedef enum BlsmoStatus {
  BLSMO_STATUS_OK = 0,
  BLSMO_STATUS_CONFIG = 1,
  BLSMO_STATUS_INFEASIBLE = 2,
  BLSMO_STATUS_MODEL = 3,
  BLSMO_STATUS_SOLVER = 4,
  BLSMO_STATUS_SIMULATION = 5,
  BLSMO_STATUS_RECONSTRUCTION = 6,
  BLSMO_STATUS_IO = 7,
  BLSMO_STATUS_NULL_POINTER = 8,
  BLSMO_STATUS_INVALID_UTF8 = 9,
  BLSMO_STATUS_PANIC = 10,
} BlsmoStatus;

// Synthesized observer gains with their diagnostics.
typedef struct BlsmoGains BlsmoGains;

// A finished simulation with metrics.
typedef struct BlsmoRun BlsmoRun;

// A scenario configuration.
typedef struct BlsmoScenario BlsmoScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread; do not free.
const char *blsmo_last_error_message(void);

// Library version as a static string.
const char *blsmo_version(void);

// Loads a built-in scenario (`"example1"`, `"example2"`).
//
// # Safety
// `name` must be a NUL-terminated string; `out` must be writable.
enum BlsmoStatus blsmo_scenario_builtin(const char *name, struct BlsmoScenario **out);

// Parses a scenario from JSON text.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum BlsmoStatus blsmo_scenario_from_json(const char *json, struct BlsmoScenario **out);

// Scenario as JSON; release with [`blsmo_string_free`]. Null on failure.
//
// # Safety
// `scenario` must be a live handle.
char *blsmo_scenario_to_json(const struct BlsmoScenario *scenario);

// Overrides the simulated span and integrator step.
//
// # Safety
// `scenario` must be a live handle.
enum BlsmoStatus blsmo_scenario_set_span(struct BlsmoScenario *scenario,
                                         double t0,
                                         double tf,
                                         double step);

// # Safety
// `scenario` must be null or a handle not yet freed.
void blsmo_scenario_free(struct BlsmoScenario *scenario);

// Solves the synthesis LMIs. `BLSMO_STATUS_INFEASIBLE` when no gains exist.
//
// # Safety
// `scenario` must be a live handle; `out` must be writable.
enum BlsmoStatus blsmo_synthesize(const struct BlsmoScenario *scenario, struct BlsmoGains **out);

// Scalar results of a synthesis; any output pointer may be null.
//
// # Safety
// `gains` must be a live handle; non-null outputs must be writable.
enum BlsmoStatus blsmo_gains_summary(const struct BlsmoGains *gains,
                                     double *mu,
                                     double *lambda1,
                                     double *bound);

// Gains and diagnostics as JSON; release with [`blsmo_string_free`].
//
// # Safety
// `gains` must be a live handle.
char *blsmo_gains_to_json(const struct BlsmoGains *gains);

// # Safety
// `gains` must be null or a handle not yet freed.
void blsmo_gains_free(struct BlsmoGains *gains);

// Simulates and reconstructs. `gains` may be null, in which case the gains
// are synthesized first.
//
// # Safety
// `scenario` must be a live handle, `gains` null or live, `out` writable.
enum BlsmoStatus blsmo_run(const struct BlsmoScenario *scenario,
                           const struct BlsmoGains *gains,
                           struct BlsmoRun **out);

// Trailing-window sup of the estimation error and its bound.
//
// # Safety
// `run` must be a live handle; non-null outputs must be writable.
enum BlsmoStatus blsmo_run_terminal_error(const struct BlsmoRun *run, double *error, double *bound);

// Number of recorded samples; 0 for a null handle.
//
// # Safety
// `run` must be null or a live handle.
uintptr_t blsmo_run_len(const struct BlsmoRun *run);

// Copies sample times and `|e_bar|` into caller buffers of length `len`,
// which must equal [`blsmo_run_len`]. Either buffer may be null.
//
// # Safety
// Non-null buffers must hold `len` writable doubles.
enum BlsmoStatus blsmo_run_copy_error(const struct BlsmoRun *run,
                                      double *t,
                                      double *e_norm,
                                      uintptr_t len);

// Run metrics as JSON; release with [`blsmo_string_free`].
//
// # Safety
// `run` must be a live handle.
char *blsmo_run_metrics_json(const struct BlsmoRun *run);

// # Safety
// `run` must be null or a handle not yet freed.
void blsmo_run_free(struct BlsmoRun *run);

// Releases a string returned by this library.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void blsmo_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BLSMO_H */
