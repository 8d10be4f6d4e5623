#ifndef INTERSIM_H
#define INTERSIM_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define ISIM_NUM_PEDS 12

#define ISIM_PED_OBS_DIM 20

#define ISIM_SDC_OBS_DIM 34

#define ISIM_GLOBAL_STATE_DIM 58

#define ISIM_GO 0

#define ISIM_WAIT 1

typedef enum IsimStatus {
  ISIM_STATUS_OK = 0,
  ISIM_STATUS_NULL_POINTER = 1,
  ISIM_STATUS_INVALID_ARGUMENT = 2,
  ISIM_STATUS_BUFFER_TOO_SMALL = 3,
  ISIM_STATUS_EPISODE_TERMINATED = 4,
  ISIM_STATUS_NO_EPISODE = 5,
  ISIM_STATUS_IO = 6,
  ISIM_STATUS_CHECKPOINT = 7,
  ISIM_STATUS_INTERNAL = 8,
} IsimStatus;

/**
 * Episode outcome codes reported by [`isim_env_status`].
 */
typedef enum IsimTerminal {
  ISIM_TERMINAL_RUNNING = 0,
  ISIM_TERMINAL_COLLISION = 1,
  ISIM_TERMINAL_GOAL = 2,
  ISIM_TERMINAL_TIMEOUT = 3,
} IsimTerminal;

/**
 * An environment plus its current episode.
 */
typedef struct IsimEnv IsimEnv;

/**
 * A set of trained policies loaded from a checkpoint.
 */
typedef struct IsimPolicy IsimPolicy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *isim_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *isim_version(void);

/**
 * Creates an environment. No episode is active until [`isim_env_reset`].
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum IsimStatus isim_env_new(struct IsimEnv **out);

/**
 * # Safety
 * `env` must be null or a handle from [`isim_env_new`] not yet freed.
 */
void isim_env_free(struct IsimEnv *env);

/**
 * Starts a new episode.
 *
 * # Safety
 * `env` must be a live handle.
 */
enum IsimStatus isim_env_reset(struct IsimEnv *env, uint64_t seed, double jaywalk_multiplier);

/**
 * Advances the episode by one step. `decisions` holds 12 entries of
 * `ISIM_GO`/`ISIM_WAIT`. Writes 1 to `done` when the episode ended.
 *
 * # Safety
 * `env` must be a live handle, `decisions` must point to 12 bytes and
 * `done` must be null or writable.
 */
enum IsimStatus isim_env_step(struct IsimEnv *env,
                              const uint8_t *decisions,
                              double accel,
                              double steer,
                              uint8_t *done);

/**
 * Copies the 34-value vehicle observation into `out`.
 *
 * # Safety
 * `env` must be a live handle and `out` must hold `len` doubles.
 */
enum IsimStatus isim_env_sdc_observation(const struct IsimEnv *env, double *out, size_t len);

/**
 * Copies the 12 x 20 pedestrian observations (row per pedestrian).
 *
 * # Safety
 * `env` must be a live handle and `out` must hold `len` doubles.
 */
enum IsimStatus isim_env_ped_observations(const struct IsimEnv *env, double *out, size_t len);

/**
 * Copies the 58-value global state.
 *
 * # Safety
 * `env` must be a live handle and `out` must hold `len` doubles.
 */
enum IsimStatus isim_env_global_state(const struct IsimEnv *env, double *out, size_t len);

/**
 * Writes the step count and the episode outcome.
 *
 * # Safety
 * `env` must be a live handle; `step` and `terminal` must be null or
 * writable.
 */
enum IsimStatus isim_env_status(const struct IsimEnv *env,
                                uint32_t *step,
                                enum IsimTerminal *terminal);

/**
 * Loads policies from a checkpoint file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum IsimStatus isim_policy_load(const char *path, struct IsimPolicy **out);

/**
 * Freshly initialized (untrained) policies for `seed`.
 *
 * # Safety
 * `out` must be writable.
 */
enum IsimStatus isim_policy_init(uint64_t seed, struct IsimPolicy **out);

/**
 * # Safety
 * `policy` must be null or a live handle.
 */
void isim_policy_free(struct IsimPolicy *policy);

/**
 * Deterministic vehicle action (clamped mean) for a 34-value observation.
 *
 * # Safety
 * `policy` must be a live handle, `obs` must hold `len` doubles, and the
 * outputs must be writable.
 */
enum IsimStatus isim_policy_sdc_action(const struct IsimPolicy *policy,
                                       const double *obs,
                                       size_t len,
                                       double *accel,
                                       double *steer);

/**
 * Most probable go/wait decision for each of the 12 pedestrians, given
 * their 12 x 20 observations.
 *
 * # Safety
 * `policy` must be a live handle, `obs` must hold `len` doubles and
 * `decisions` must have room for 12 bytes.
 */
enum IsimStatus isim_policy_ped_decisions(const struct IsimPolicy *policy,
                                          const double *obs,
                                          size_t len,
                                          uint8_t *decisions);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* INTERSIM_H */
