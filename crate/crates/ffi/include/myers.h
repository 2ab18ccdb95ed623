#ifndef MYERS_FFI_H
#define MYERS_FFI_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by the C entry points.
 */
typedef enum MyersStatus {
  MyersStatus_Ok = 0,
  MyersStatus_NullArgument = 1,
  MyersStatus_InvalidUtf8 = 2,
  MyersStatus_ConfigError = 3,
  MyersStatus_NumericalError = 4,
} MyersStatus;

/**
 * Opaque run handle: a validated manifold + potential + numeric settings.
 */
typedef struct MyersRun MyersRun;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The
 * pointer is valid until the next library call on the same thread.
 */
const char *myers_last_error_message(void);

/**
 * Build a run handle from a JSON configuration (same schema as the CLI).
 * Returns null on error.
 *
 * # Safety
 * `config_json` must be a valid NUL-terminated C string or null.
 */
struct MyersRun *myers_run_new_from_json(const char *config_json);

/**
 * Release a run handle. Null is ignored.
 *
 * # Safety
 * `run` must have come from `myers_run_new_from_json` and not be freed twice.
 */
void myers_run_free(struct MyersRun *run);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must have been returned by a myers_* function and not freed before.
 */
void myers_string_free(char *s);

/**
 * Run the full criterion check and return the report as a JSON string
 * (caller frees with `myers_string_free`). Returns null on error.
 *
 * # Safety
 * `run` must be a live handle from `myers_run_new_from_json`.
 */
char *myers_run_check_json(struct MyersRun *run);

/**
 * Criterion eigenvalue lambda0 of the configured model (spectral engine
 * only; no Monte Carlo).
 *
 * # Safety
 * `run` must be a live handle; `out` must point to a writable double.
 */
enum MyersStatus myers_run_lambda0(struct MyersRun *run, double *out);

/**
 * Curvature floor rho^h at a chart point.
 *
 * # Safety
 * `run` must be a live handle; `out` must point to a writable double.
 */
enum MyersStatus myers_run_rho_h(struct MyersRun *run,
                                 uint32_t chart,
                                 double u,
                                 double v,
                                 double *out);

/**
 * Weighted volume of the configured manifold at the configured resolution.
 *
 * # Safety
 * `run` must be a live handle; `out` must point to a writable double.
 */
enum MyersStatus myers_run_h_volume(struct MyersRun *run, double *out);

/**
 * Library version as a static string (do not free).
 */
const char *myers_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MYERS_FFI_H */
