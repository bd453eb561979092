#ifndef QCOPT_H
#define QCOPT_H

/* Generated by cbindgen from the qcopt-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by fallible functions.
 */
typedef enum {
  QCOPT_STATUS_OK = 0,
  /**
   * A pointer argument was null or a value argument was out of range.
   */
  QCOPT_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Malformed input (JSON, connectivity, qubit indices).
   */
  QCOPT_STATUS_FORMAT = 2,
  /**
   * The operation is unsupported for this input (e.g. too many qubits
   * for a dense unitary).
   */
  QCOPT_STATUS_UNSUPPORTED = 3,
  /**
   * The requested action cell is masked out.
   */
  QCOPT_STATUS_MASKED_ACTION = 4,
  /**
   * The episode has already finished.
   */
  QCOPT_STATUS_DONE = 5,
  /**
   * Any other failure; see `qcopt_last_error_message`.
   */
  QCOPT_STATUS_INTERNAL = 6,
} QcoptStatus;

/**
 * Opaque circuit handle.
 */
typedef struct QcoptCircuit QcoptCircuit;

/**
 * Opaque environment handle (one optimization episode).
 */
typedef struct QcoptEnv QcoptEnv;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last error raised on this thread. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *qcopt_last_error_message(void);

/**
 * Parse a circuit from its canonical JSON document.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be writable.
 */
QcoptStatus qcopt_circuit_from_json(const char *json, QcoptCircuit **out);

/**
 * Serialize a circuit to its canonical JSON document. The returned string
 * must be released with `qcopt_string_free`.
 *
 * # Safety
 * `circuit` must be a live handle; `out` must be writable.
 */
QcoptStatus qcopt_circuit_to_json(const QcoptCircuit *circuit, char **out);

/**
 * Release a string returned by this library.
 *
 * # Safety
 * `s` must come from this library and not be freed twice.
 */
void qcopt_string_free(char *s);

/**
 * Release a circuit handle.
 *
 * # Safety
 * `circuit` must come from this library and not be freed twice.
 */
void qcopt_circuit_free(QcoptCircuit *circuit);

/**
 * Number of qubits, or 0 for a null handle.
 *
 * # Safety
 * `circuit` must be a live handle or null.
 */
uintptr_t qcopt_circuit_num_qubits(const QcoptCircuit *circuit);

/**
 * Circuit depth (number of moments), or 0 for a null handle.
 *
 * # Safety
 * `circuit` must be a live handle or null.
 */
uintptr_t qcopt_circuit_depth(const QcoptCircuit *circuit);

/**
 * Gate count, or 0 for a null handle.
 *
 * # Safety
 * `circuit` must be a live handle or null.
 */
uintptr_t qcopt_circuit_gate_count(const QcoptCircuit *circuit);

/**
 * Quality `alpha * depth + beta * gate_count`.
 *
 * # Safety
 * `circuit` must be a live handle; `out` must be writable.
 */
QcoptStatus qcopt_circuit_quality(const QcoptCircuit *circuit,
                                  double alpha,
                                  double beta,
                                  double *out);

/**
 * Exhaustively apply the hard rewrite rules; returns a new handle.
 *
 * # Safety
 * `circuit` must be a live handle; `out` must be writable.
 */
QcoptStatus qcopt_circuit_prune(const QcoptCircuit *circuit, QcoptCircuit **out);

/**
 * Check phase-equivalence of two circuits' unitaries within `tol`.
 * Writes 1 or 0 to `out`; fails with `Unsupported` above the dense cap.
 *
 * # Safety
 * `a` and `b` must be live handles; `out` must be writable.
 */
QcoptStatus qcopt_circuit_equivalent(const QcoptCircuit *a,
                                     const QcoptCircuit *b,
                                     double tol,
                                     int32_t *out);

/**
 * Start an optimization episode on a circuit. `capacity` of 0 selects the
 * default (twice the start depth).
 *
 * # Safety
 * `circuit` must be a live handle; `out` must be writable.
 */
QcoptStatus qcopt_env_new(const QcoptCircuit *circuit,
                          uintptr_t episode_len,
                          uintptr_t capacity,
                          QcoptEnv **out);

/**
 * Release an environment handle.
 *
 * # Safety
 * `env` must come from this library and not be freed twice.
 */
void qcopt_env_free(QcoptEnv *env);

/**
 * Moment capacity of the observation grid, or 0 for a null handle.
 *
 * # Safety
 * `env` must be a live handle or null.
 */
uintptr_t qcopt_env_capacity(const QcoptEnv *env);

/**
 * 1 when the episode has finished, 0 otherwise (or for a null handle).
 *
 * # Safety
 * `env` must be a live handle or null.
 */
int32_t qcopt_env_is_done(const QcoptEnv *env);

/**
 * Byte length of the observation buffer:
 * qubits * capacity * 8 gate-class channels, one byte per cell.
 *
 * # Safety
 * `env` must be a live handle or null.
 */
uintptr_t qcopt_env_observation_len(const QcoptEnv *env);

/**
 * Copy the one-hot observation grid, row-major (qubit, moment, channel).
 *
 * # Safety
 * `env` must be a live handle; `buf` must hold at least `len` bytes.
 */
QcoptStatus qcopt_env_observation(const QcoptEnv *env, uint8_t *buf, uintptr_t len);

/**
 * Byte length of the packed action-mask buffer.
 *
 * # Safety
 * `env` must be a live handle or null.
 */
uintptr_t qcopt_env_mask_len(const QcoptEnv *env);

/**
 * Copy the action mask, 1-bit packed, row-major (qubit, moment, rule),
 * least significant bit first.
 *
 * # Safety
 * `env` must be a live handle; `buf` must hold at least `len` bytes.
 */
QcoptStatus qcopt_env_mask(const QcoptEnv *env, uint8_t *buf, uintptr_t len);

/**
 * Apply the soft transformation at an action-grid cell. Writes the reward
 * and the done flag.
 *
 * # Safety
 * `env` must be a live handle; `reward` and `done` must be writable.
 */
QcoptStatus qcopt_env_step(QcoptEnv *env,
                           uintptr_t qubit,
                           uintptr_t moment,
                           uintptr_t rule,
                           double *reward,
                           int32_t *done);

/**
 * Clone the environment's current circuit into a fresh handle.
 *
 * # Safety
 * `env` must be a live handle; `out` must be writable.
 */
QcoptStatus qcopt_env_state(const QcoptEnv *env, QcoptCircuit **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCOPT_H */
