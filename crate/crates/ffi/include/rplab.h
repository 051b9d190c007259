#ifndef RPLAB_H
#define RPLAB_H

/* Generated by the crate's build script; edit src/lib.rs instead. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum RplabStatus {
  /**
   * The call succeeded.
   */
  RPLAB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  RPLAB_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  RPLAB_STATUS_INVALID_UTF8 = 2,
  /**
   * Text input (circuit, number, or transcript) failed to parse.
   */
  RPLAB_STATUS_PARSE_ERROR = 3,
  /**
   * The instance has no strict majority, so the game is undefined.
   */
  RPLAB_STATUS_TIE = 4,
  /**
   * The exact computation would exceed the configured enumeration bound.
   */
  RPLAB_STATUS_BOUND_EXCEEDED = 5,
  /**
   * The protocol shape or its reward grid is invalid.
   */
  RPLAB_STATUS_MALFORMED_PROTOCOL = 6,
  /**
   * An exact value fell outside the dyadic number system.
   */
  RPLAB_STATUS_UNREPRESENTABLE = 7,
  /**
   * An unclassified failure; see the error message.
   */
  RPLAB_STATUS_INTERNAL_ERROR = 8,
} RplabStatus;

/**
 * An immutable boolean circuit.
 */
typedef struct CircuitHandle CircuitHandle;

/**
 * The result of solving a protocol exactly.
 */
typedef struct OutcomeHandle OutcomeHandle;

/**
 * A reward-paying interactive protocol.
 */
typedef struct ProtocolHandle ProtocolHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message for the most recent failure on this thread, or an empty
 * string when no call has failed yet. Valid until the next failing call.
 */
const char *rplab_last_error(void);

/**
 * Parse the textual gate-list format into a circuit.
 *
 * # Safety
 * `text` must be a valid, nul-terminated C string and `out` a valid
 * pointer. On success `*out` owns the circuit; release it with
 * [`rplab_circuit_free`].
 */
enum RplabStatus rplab_circuit_parse(const char *text, struct CircuitHandle **out);

/**
 * Release a circuit. Null is ignored.
 *
 * # Safety
 * `handle` must be null or a pointer from [`rplab_circuit_parse`] that
 * has not been freed yet.
 */
void rplab_circuit_free(struct CircuitHandle *handle);

/**
 * Number of input bits, or 0 when `handle` is null.
 *
 * # Safety
 * `handle` must be null or a live circuit handle.
 */
uint32_t rplab_circuit_input_count(const struct CircuitHandle *handle);

/**
 * Count the accepting assignments by exhausting all of them.
 *
 * # Safety
 * `handle` must be a live circuit handle and `out` a valid pointer.
 */
enum RplabStatus rplab_circuit_accepting_count(const struct CircuitHandle *handle,
                                               uint64_t bound,
                                               uint32_t workers,
                                               uint64_t *out);

/**
 * Build the one-round majority vote game for a circuit. Fails with
 * `Tie` when the circuit accepts exactly half of all assignments.
 *
 * # Safety
 * `circuit` must be a live circuit handle and `out` a valid pointer.
 * On success `*out` owns the protocol; release it with
 * [`rplab_protocol_free`].
 */
enum RplabStatus rplab_vote_game(const struct CircuitHandle *circuit,
                                 uint64_t bound,
                                 uint32_t workers,
                                 struct ProtocolHandle **out);

/**
 * Build the quadratic-scoring count game for a circuit. The claimed
 * quantity is the accepting count, or its parity when `parity` is set.
 *
 * # Safety
 * `circuit` must be a live circuit handle and `out` a valid pointer.
 * On success `*out` owns the protocol; release it with
 * [`rplab_protocol_free`].
 */
enum RplabStatus rplab_count_game(const struct CircuitHandle *circuit,
                                  bool parity,
                                  struct ProtocolHandle **out);

/**
 * Release a protocol. Null is ignored.
 *
 * # Safety
 * `handle` must be null or a live protocol handle.
 */
void rplab_protocol_free(struct ProtocolHandle *handle);

/**
 * The protocol's display name. Null when `handle` is null.
 *
 * # Safety
 * `handle` must be null or a live protocol handle; the string is valid
 * while the handle lives.
 */
const char *rplab_protocol_name(const struct ProtocolHandle *handle);

/**
 * Number of prover messages, or 0 when `handle` is null.
 *
 * # Safety
 * `handle` must be null or a live protocol handle.
 */
uint32_t rplab_protocol_rounds(const struct ProtocolHandle *handle);

/**
 * Solve a protocol exactly on `input` and return the outcome.
 *
 * # Safety
 * `protocol` must be a live protocol handle, `input` a valid C string,
 * and `out` a valid pointer. On success `*out` owns the outcome; release
 * it with [`rplab_outcome_free`].
 */
enum RplabStatus rplab_solve(const struct ProtocolHandle *protocol,
                             const char *input,
                             uint64_t bound,
                             uint32_t workers,
                             struct OutcomeHandle **out);

/**
 * Release an outcome. Null is ignored.
 *
 * # Safety
 * `handle` must be null or a live outcome handle.
 */
void rplab_outcome_free(struct OutcomeHandle *handle);

/**
 * The exact optimal value, rendered as `num/2^exp`. Null when `handle`
 * is null.
 *
 * # Safety
 * `handle` must be null or a live outcome handle; the string is valid
 * while the handle lives.
 */
const char *rplab_outcome_value(const struct OutcomeHandle *handle);

/**
 * The smallest margin by which any suboptimal message loses, or `+inf`
 * when no message is ever suboptimal. Null when `handle` is null.
 *
 * # Safety
 * `handle` must be null or a live outcome handle; the string is valid
 * while the handle lives.
 */
const char *rplab_outcome_gap(const struct OutcomeHandle *handle);

/**
 * The lowest-numbered optimal opening message, as a bit string. Null
 * when `handle` is null.
 *
 * # Safety
 * `handle` must be null or a live outcome handle; the string is valid
 * while the handle lives.
 */
const char *rplab_outcome_best_message(const struct OutcomeHandle *handle);

/**
 * Number of information sets the optimal strategy can reach.
 *
 * # Safety
 * `handle` must be null or a live outcome handle.
 */
uint64_t rplab_outcome_node_count(const struct OutcomeHandle *handle);

/**
 * Number of distinct optimal opening messages.
 *
 * # Safety
 * `handle` must be null or a live outcome handle.
 */
uint64_t rplab_outcome_optimum_count(const struct OutcomeHandle *handle);

/**
 * Check that every optimal strategy commits to `truth`. Writes the
 * verdict to `out_pass`.
 *
 * # Safety
 * `protocol` must be a live protocol handle, `input` and `truth` valid
 * C strings, and `out_pass` a valid pointer.
 */
enum RplabStatus rplab_verify(const struct ProtocolHandle *protocol,
                              const char *input,
                              const char *truth,
                              uint64_t bound,
                              uint32_t workers,
                              bool *out_pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RPLAB_H */
