#ifndef WEIGHTSHIFT_H
#define WEIGHTSHIFT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum WsStatus {
  WS_STATUS_OK = 0,
  WS_STATUS_NULL_POINTER = 1,
  WS_STATUS_INVALID_UTF8 = 2,
  /**
   * Malformed JSON or out-of-range input.
   */
  WS_STATUS_INPUT_ERROR = 3,
  /**
   * A mathematical hypothesis or gate failed.
   */
  WS_STATUS_GATE_ERROR = 4,
  /**
   * `verify` found a failing suite.
   */
  WS_STATUS_SUITE_FAILURE = 5,
  WS_STATUS_INTERNAL = 6,
  WS_STATUS_PANIC = 7,
} WsStatus;

/**
 * A crystabelline module with its Hodge flags.
 */
typedef struct WsCrysModule WsCrysModule;

/**
 * A rational Sen lattice.
 */
typedef struct WsSenLattice WsSenLattice;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Run a command on a JSON payload and write the JSON report to `*out_report`.
 *
 * The report is written for library errors too; the status mirrors the
 * report's exit code.
 *
 * # Safety
 * `command` and `payload_json` must be NUL-terminated strings; `out_report`
 * must be a valid pointer.
 */
enum WsStatus ws_run(const char *command,
                     const char *payload_json,
                     uint64_t seed,
                     char **out_report);

/**
 * Release a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and must not be freed twice.
 */
void ws_string_free(char *s);

/**
 * The last error message on this thread, or null. Free with [`ws_string_free`].
 */
char *ws_last_error_message(void);

/**
 * Build a crystabelline module from a `refinements` payload.
 *
 * # Safety
 * `spec_json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum WsStatus ws_crys_module_new(const char *spec_json, struct WsCrysModule **out);

/**
 * # Safety
 * `m` must come from [`ws_crys_module_new`] and not be freed twice.
 */
void ws_crys_module_free(struct WsCrysModule *m);

/**
 * Rank of the module; 0 for a null handle.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
uintptr_t ws_crys_module_rank(const struct WsCrysModule *m);

/**
 * Whether every refinement is non-critical.
 *
 * # Safety
 * `m` must be a live handle and `out` a valid pointer.
 */
enum WsStatus ws_crys_module_is_noncritical(const struct WsCrysModule *m, bool *out);

/**
 * Étaleness verdict of a non-critical module.
 *
 * # Safety
 * `m` must be a live handle and `out` a valid pointer.
 */
enum WsStatus ws_crys_module_is_etale(const struct WsCrysModule *m, bool *out);

/**
 * Build a Sen lattice from a JSON square matrix of rationals.
 *
 * # Safety
 * `theta_json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum WsStatus ws_sen_lattice_new(const char *theta_json, struct WsSenLattice **out);

/**
 * # Safety
 * `l` must come from this library and not be freed twice.
 */
void ws_sen_lattice_free(struct WsSenLattice *l);

/**
 * Characteristic polynomial as a JSON array of coefficients, constant first.
 *
 * # Safety
 * `l` must be a live handle and `out_json` a valid pointer.
 */
enum WsStatus ws_sen_lattice_charpoly(const struct WsSenLattice *l, char **out_json);

/**
 * Lower the lattice along the roots selected by `subset_json` (1-based
 * indices into `roots_json`), producing a new handle.
 *
 * # Safety
 * `l` must be a live handle, the strings NUL-terminated and `out` valid.
 */
enum WsStatus ws_sen_lattice_modify_down(const struct WsSenLattice *l,
                                         const char *roots_json,
                                         const char *subset_json,
                                         struct WsSenLattice **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WEIGHTSHIFT_H */
