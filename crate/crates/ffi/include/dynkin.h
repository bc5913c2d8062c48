/* C interface of the dynkin constrained-game solver. */

#ifndef DYNKIN_H
#define DYNKIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum DynkinStatus {
  DynkinStatusOk = 0,
  /**
   * A required pointer argument was NULL.
   */
  DynkinStatusNullArgument = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  DynkinStatusUtf8 = 2,
  /**
   * The experiment document failed to parse.
   */
  DynkinStatusParse = 3,
  /**
   * The experiment document failed validation.
   */
  DynkinStatusValidation = 4,
  /**
   * A value left the criterion's validity interval.
   */
  DynkinStatusDomain = 5,
  /**
   * The requested operation does not apply to this configuration.
   */
  DynkinStatusMode = 6,
  /**
   * The explicit scheme's stability bound was violated.
   */
  DynkinStatusCfl = 7,
  /**
   * Exponential overflow in the quadratic driver.
   */
  DynkinStatusOverflow = 8,
  /**
   * Any other runtime failure; see the last-error message.
   */
  DynkinStatusRuntime = 9,
  /**
   * A panic was caught at the boundary.
   */
  DynkinStatusInternal = 10,
} DynkinStatus;

/**
 * Opaque experiment handle: a parsed and validated document plus its model.
 */
typedef struct DynkinExperiment DynkinExperiment;

/**
 * Opaque solved-surface handle.
 */
typedef struct DynkinSurface DynkinSurface;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message into `buf` (NUL-terminated, truncated to
 * `cap`); returns the full message length in bytes excluding the NUL.
 *
 * # Safety
 * `buf` must point to `cap` writable bytes, or be NULL (query mode).
 */
size_t dynkin_last_error(char *buf, size_t cap);

/**
 * Library version as a static NUL-terminated string.
 */
const char *dynkin_version(void);

/**
 * Parse and validate an experiment TOML document.
 *
 * On success writes a handle to `out`; the caller frees it with
 * [`dynkin_experiment_free`].
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum DynkinStatus dynkin_experiment_from_toml(const char *text, struct DynkinExperiment **out);

/**
 * Free an experiment handle (NULL is ignored).
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void dynkin_experiment_free(struct DynkinExperiment *handle);

/**
 * Solve the experiment's equation with its configured grid solver (`ode` or
 * `pde` mode) and return an owned surface handle.
 *
 * # Safety
 * `handle` and `out` must be valid pointers.
 */
enum DynkinStatus dynkin_solve(const struct DynkinExperiment *handle, struct DynkinSurface **out);

/**
 * Free a surface handle (NULL is ignored).
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void dynkin_surface_free(struct DynkinSurface *handle);

/**
 * Game value at `(t, x)` by bilinear interpolation.
 *
 * # Safety
 * `handle` and `out` must be valid pointers.
 */
enum DynkinStatus dynkin_surface_value(const struct DynkinSurface *handle,
                                       double t,
                                       double x,
                                       double *out);

/**
 * Game value at `(0, x0)`.
 *
 * # Safety
 * `handle` and `out` must be valid pointers.
 */
enum DynkinStatus dynkin_surface_value0(const struct DynkinSurface *handle, double *out);

/**
 * Monte Carlo estimate of the game value under the optimal threshold
 * policies read from `surface`; writes the estimate and its delta-method
 * standard error.
 *
 * # Safety
 * All pointer arguments must be valid; `out_value`/`out_stderr` may be NULL
 * to skip that output.
 */
enum DynkinStatus dynkin_estimate_value(const struct DynkinExperiment *handle,
                                        const struct DynkinSurface *surface,
                                        size_t n_paths,
                                        size_t n_steps,
                                        uint64_t seed,
                                        double *out_value,
                                        double *out_stderr);

/**
 * Execute the experiment end to end (solver, checks, artifacts), as the CLI
 * `run` subcommand does. `out_dir` may be NULL to use the document's output
 * directory. Writes 1 to `out_all_passed` iff every configured check passed.
 *
 * # Safety
 * `handle` must be valid; `out_dir`, when non-NULL, must be NUL-terminated;
 * `out_all_passed` may be NULL.
 */
enum DynkinStatus dynkin_experiment_run(const struct DynkinExperiment *handle,
                                        const char *out_dir,
                                        uint64_t seed_override,
                                        bool has_seed_override,
                                        bool *out_all_passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DYNKIN_H */
