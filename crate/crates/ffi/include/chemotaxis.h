#ifndef CHEMOTAXIS_H
#define CHEMOTAXIS_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum ChemoStatus {
  CHEMO_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  CHEMO_STATUS_NULL_POINTER = 1,
  /**
   * An argument, grid, field or weight pair was rejected.
   */
  CHEMO_STATUS_INVALID_ARGUMENT = 2,
  /**
   * A configuration key failed to parse or validate.
   */
  CHEMO_STATUS_CONFIG = 3,
  /**
   * The scheme failed: positivity, solver convergence or a non-finite value.
   */
  CHEMO_STATUS_NUMERICAL = 4,
  /**
   * Reading or writing files failed.
   */
  CHEMO_STATUS_IO = 5,
  /**
   * An index or buffer length was out of range.
   */
  CHEMO_STATUS_OUT_OF_RANGE = 6,
  /**
   * A panic was caught at the boundary.
   */
  CHEMO_STATUS_PANIC = 7,
} ChemoStatus;

/**
 * Which runner [`chemo_run`] executes.
 */
typedef enum ChemoCommand {
  CHEMO_COMMAND_SIMULATE = 0,
  CHEMO_COMMAND_SWEEP = 1,
  CHEMO_COMMAND_CERTIFY = 2,
  CHEMO_COMMAND_REFINE = 3,
} ChemoCommand;

/**
 * Which field of a snapshot to copy out.
 */
typedef enum ChemoField {
  CHEMO_FIELD_U = 0,
  CHEMO_FIELD_V = 1,
  CHEMO_FIELD_W = 2,
} ChemoField;

/**
 * Opaque run configuration.
 */
typedef struct ChemoConfig ChemoConfig;

/**
 * Opaque simulated trajectory with its snapshots.
 */
typedef struct ChemoTrajectory ChemoTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or an empty string. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *chemo_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *chemo_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void chemo_string_free(char *s);

/**
 * The built-in canonical configuration.
 *
 * # Safety
 * `out` must be a valid pointer to write the handle to.
 */
enum ChemoStatus chemo_config_canonical(struct ChemoConfig **out);

/**
 * Parses configuration text in the `key = value` format of the CLI.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum ChemoStatus chemo_config_parse(const char *text, struct ChemoConfig **out);

/**
 * Serializes every key of `cfg`; release the result with [`chemo_string_free`].
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum ChemoStatus chemo_config_to_text(const struct ChemoConfig *cfg, char **out);

/**
 * Sets the directory the runners write to.
 *
 * # Safety
 * `cfg` must be a live handle and `dir` a NUL-terminated string.
 */
enum ChemoStatus chemo_config_set_out_dir(struct ChemoConfig *cfg, const char *dir);

/**
 * # Safety
 * `cfg` must come from this library and not be freed twice; null is ignored.
 */
void chemo_config_free(struct ChemoConfig *cfg);

/**
 * Runs one CLI command against `cfg`, writing its artifacts to the
 * configured output directory. `passed` receives whether every check passed.
 *
 * # Safety
 * `cfg` must be a live handle and `passed` a valid pointer.
 */
enum ChemoStatus chemo_run(const struct ChemoConfig *cfg, enum ChemoCommand command, bool *passed);

/**
 * Checks the coefficient identities on the built-in weight lattice.
 *
 * # Safety
 * `passed` must be a valid pointer.
 */
enum ChemoStatus chemo_verify_identities(size_t samples, uint64_t seed, bool *passed);

/**
 * Simulates `cfg` in memory, keeping snapshots at the output times and the
 * quadrature cadence.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum ChemoStatus chemo_simulate(const struct ChemoConfig *cfg, struct ChemoTrajectory **out);

/**
 * # Safety
 * `traj` must come from this library and not be freed twice; null is ignored.
 */
void chemo_trajectory_free(struct ChemoTrajectory *traj);

/**
 * Number of snapshots, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be a live handle or null.
 */
size_t chemo_trajectory_snapshot_count(const struct ChemoTrajectory *traj);

/**
 * Number of cells per field, or 0 for a null handle.
 *
 * # Safety
 * `traj` must be a live handle or null.
 */
size_t chemo_trajectory_cell_count(const struct ChemoTrajectory *traj);

/**
 * Time of snapshot `index`.
 *
 * # Safety
 * `traj` must be a live handle and `time` a valid pointer.
 */
enum ChemoStatus chemo_trajectory_time(const struct ChemoTrajectory *traj,
                                       size_t index,
                                       double *time);

/**
 * Copies one field of snapshot `index` into `buf`, which must hold at least
 * [`chemo_trajectory_cell_count`] values in row-major cell order.
 *
 * # Safety
 * `traj` must be a live handle and `buf` valid for `len` writes.
 */
enum ChemoStatus chemo_trajectory_field(const struct ChemoTrajectory *traj,
                                        size_t index,
                                        enum ChemoField field,
                                        double *buf,
                                        size_t len);

/**
 * Final running space-time integrals in the order u^θ, v², |∇w|²,
 * |∇ln(1+v)|², v²|∇w|²/(1+v)², |f_u|, |f_v|, f_u⁺, f_v⁺, f_u, f_v, source,
 * source gap. `buf` must hold 13 values.
 *
 * # Safety
 * `traj` must be a live handle and `buf` valid for `len` writes.
 */
enum ChemoStatus chemo_trajectory_accumulators(const struct ChemoTrajectory *traj,
                                               double *buf,
                                               size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHEMOTAXIS_H */
