#ifndef JETFLOW_H
#define JETFLOW_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by all fallible functions.
typedef enum JetflowStatus {
  JETFLOW_STATUS_OK = 0,
  JETFLOW_STATUS_NULL_POINTER = 1,
  JETFLOW_STATUS_INVALID_UTF8 = 2,
  JETFLOW_STATUS_INVALID_INPUT = 3,
  JETFLOW_STATUS_DIVERGENCE = 4,
  JETFLOW_STATUS_OUT_OF_RANGE = 5,
  JETFLOW_STATUS_BUFFER_TOO_SMALL = 6,
  JETFLOW_STATUS_PANIC = 7,
} JetflowStatus;

// A validated particle system.
typedef struct JetflowSystem JetflowSystem;

// An integrated trajectory with a snapshot per step.
typedef struct JetflowTrajectory JetflowTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or an empty string. The
// pointer stays valid until the next call into this library on the thread.
const char *jetflow_last_error(void);

// Library version as a static NUL-terminated string.
const char *jetflow_version(void);

// Builds a system from a JSON run configuration. `seed` may be null; when
// given, particles without momenta receive seeded random momenta.
//
// # Safety
// `config_json` must be a NUL-terminated string, `seed` null or valid, and
// `out_system` a valid pointer.
enum JetflowStatus jetflow_system_from_json(const char *config_json,
                                            const uint64_t *seed,
                                            struct JetflowSystem **out_system);

// # Safety
// `system` must be null or a handle from this library, freed at most once.
void jetflow_system_free(struct JetflowSystem *system);

// Spatial dimension, jet order and particle count.
//
// # Safety
// All pointers must be valid.
enum JetflowStatus jetflow_system_shape(const struct JetflowSystem *system,
                                        size_t *dim,
                                        size_t *order,
                                        size_t *particles);

// # Safety
// `system` and `value` must be valid.
enum JetflowStatus jetflow_system_hamiltonian(const struct JetflowSystem *system, double *value);

// Packed canonical coordinates, per particle `[q, g, s, pi_q, pi_g, pi_s]`
// row-major. `needed` (may be null) receives the length; pass a null
// `buffer` with `len = 0` to query it.
//
// # Safety
// `buffer` must hold `len` doubles.
enum JetflowStatus jetflow_system_coordinates(const struct JetflowSystem *system,
                                              double *buffer,
                                              size_t len,
                                              size_t *needed);

// Integrates with fixed-step RK4.
//
// # Safety
// `system` and `out_trajectory` must be valid.
enum JetflowStatus jetflow_integrate(const struct JetflowSystem *system,
                                     double t_final,
                                     double dt,
                                     struct JetflowTrajectory **out_trajectory);

// # Safety
// `trajectory` must be null or a handle from this library, freed at most once.
void jetflow_trajectory_free(struct JetflowTrajectory *trajectory);

// Number of snapshots, 0 for a null handle.
//
// # Safety
// `trajectory` must be null or valid.
size_t jetflow_trajectory_len(const struct JetflowTrajectory *trajectory);

// # Safety
// `trajectory` and `time` must be valid.
enum JetflowStatus jetflow_trajectory_time(const struct JetflowTrajectory *trajectory,
                                           size_t step,
                                           double *time);

// Position of one particle at one snapshot.
//
// # Safety
// `buffer` must hold `len` doubles.
enum JetflowStatus jetflow_trajectory_position(const struct JetflowTrajectory *trajectory,
                                               size_t step,
                                               size_t particle,
                                               double *buffer,
                                               size_t len);

// Copies one snapshot into a new system handle.
//
// # Safety
// `trajectory` and `out_system` must be valid.
enum JetflowStatus jetflow_trajectory_state(const struct JetflowTrajectory *trajectory,
                                            size_t step,
                                            struct JetflowSystem **out_system);

// Trajectory JSON as written by `jetflow shoot`.
//
// # Safety
// `trajectory` and `out_json` must be valid.
enum JetflowStatus jetflow_trajectory_to_json(const struct JetflowTrajectory *trajectory,
                                              char **out_json);

// Invariant drift report JSON as written by `jetflow check`.
//
// # Safety
// `trajectory` and `out_json` must be valid.
enum JetflowStatus jetflow_trajectory_audit_json(const struct JetflowTrajectory *trajectory,
                                                 char **out_json);

// # Safety
// `s` must be null or a string returned by this library, freed at most once.
void jetflow_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JETFLOW_H */
