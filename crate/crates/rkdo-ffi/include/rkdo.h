/* C interface for the rkdo response-field training library. */

#ifndef RKDO_FFI_H
#define RKDO_FFI_H

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible library call.
typedef enum RkdoStatus {
  RKDO_STATUS_OK = 0,
  // A required pointer argument was null.
  RKDO_STATUS_NULL_POINTER = 1,
  // Arguments failed validation; the error message has details.
  RKDO_STATUS_INVALID_ARGUMENT = 2,
  // A loss or gradient stopped being finite.
  RKDO_STATUS_NUMERICAL_ERROR = 3,
  RKDO_STATUS_IO_ERROR = 4,
  RKDO_STATUS_PARSE_ERROR = 5,
  // An internal invariant broke; the handle states are unspecified.
  RKDO_STATUS_INTERNAL_PANIC = 6,
} RkdoStatus;

// An owned n-by-d embedding table.
typedef struct RkdoEmbeddings RkdoEmbeddings;

// An owned n-by-n row-stochastic response field.
typedef struct RkdoField RkdoField;

// An owned training trace: per-step losses plus the final embeddings.
typedef struct RkdoTrace RkdoTrace;

// Training hyperparameters, plain-old-data so callers can fill them field by
// field. Obtain defaults from `rkdo_train_options_default`.
typedef struct RkdoTrainOptions {
  // EMA coefficient in (0, 1] pulling the supervisor toward the model.
  double alpha;
  // Inner supervisor-refresh + gradient-step cycles per recorded step.
  size_t recursion_depth;
  // Recorded outer steps.
  size_t steps;
  // Initial softmax temperature (> 0).
  double tau0;
  // Linear temperature decay fraction in [0, 1).
  double beta;
  // 0 = plain gradient descent, 1 = Adam.
  uint32_t optimizer;
  double learning_rate;
  double weight_decay;
  double adam_beta1;
  double adam_beta2;
  double adam_epsilon;
  // Stream seed for the run.
  uint64_t seed;
} RkdoTrainOptions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Number of bytes (including the trailing nul) needed to hold the message
// for the most recent failed call on this thread. Zero when none.
size_t rkdo_last_error_length(void);

// Copies the most recent error message into `buffer` as a nul-terminated
// string and returns the number of bytes written (including the nul).
// Returns 0 if `buffer` is null or `capacity` is too small.
//
// # Safety
// `buffer` must point to at least `capacity` writable bytes.
size_t rkdo_last_error_message(char *buffer, size_t capacity);

// Creates the uniform off-diagonal field over `n` points.
//
// # Safety
// `out` must be a valid pointer; on success it receives an owned handle.
enum RkdoStatus rkdo_field_uniform(size_t n, struct RkdoField **out);

// Creates a random row-stochastic field from the given seed.
//
// # Safety
// `out` must be a valid pointer; on success it receives an owned handle.
enum RkdoStatus rkdo_field_random(size_t n, uint64_t seed, struct RkdoField **out);

// Builds a field from `n * n` row-major entries (zero diagonal, rows
// summing to one).
//
// # Safety
// `entries` must point to `len` readable doubles; `out` must be valid.
enum RkdoStatus rkdo_field_from_rows(size_t n,
                                     const double *entries,
                                     size_t len,
                                     struct RkdoField **out);

// Number of points in the field; 0 for a null handle.
//
// # Safety
// `field` must be a live handle or null.
size_t rkdo_field_len(const struct RkdoField *field);

// Copies the field's `n * n` row-major entries into `buffer`.
//
// # Safety
// `buffer` must point to at least `capacity` writable doubles.
enum RkdoStatus rkdo_field_copy_rows(const struct RkdoField *field,
                                     double *buffer,
                                     size_t capacity);

// Mean row-wise KL divergence of `p` from `q`, in nats.
//
// # Safety
// `p` and `q` must be live handles; `out` must be valid.
enum RkdoStatus rkdo_field_loss(const struct RkdoField *p, const struct RkdoField *q, double *out);

// Convex combination `(1 - alpha) * p + alpha * q`, the supervisor update.
//
// # Safety
// `p` and `q` must be live handles; `out` must be valid.
enum RkdoStatus rkdo_supervisor_update(const struct RkdoField *p,
                                       const struct RkdoField *q,
                                       double alpha,
                                       struct RkdoField **out);

// Mixes `p` with the uniform off-diagonal field at weight `debias`.
//
// # Safety
// `p` must be a live handle; `out` must be valid.
enum RkdoStatus rkdo_debiased_target(const struct RkdoField *p,
                                     double debias,
                                     struct RkdoField **out);

// Releases a field handle; null is ignored.
//
// # Safety
// `field` must be a handle returned by this library, freed at most once.
void rkdo_field_free(struct RkdoField *field);

// Random unit-norm embeddings, deterministic in the seed.
//
// # Safety
// `out` must be a valid pointer; on success it receives an owned handle.
enum RkdoStatus rkdo_embeddings_random_unit(size_t n,
                                            size_t dim,
                                            uint64_t seed,
                                            struct RkdoEmbeddings **out);

// Builds embeddings from `n * dim` row-major coordinates.
//
// # Safety
// `coords` must point to `len` readable doubles; `out` must be valid.
enum RkdoStatus rkdo_embeddings_from_rows(size_t n,
                                          size_t dim,
                                          const double *coords,
                                          size_t len,
                                          struct RkdoEmbeddings **out);

// Number of embedded points; 0 for a null handle.
//
// # Safety
// `embeddings` must be a live handle or null.
size_t rkdo_embeddings_len(const struct RkdoEmbeddings *embeddings);

// Embedding dimensionality; 0 for a null handle.
//
// # Safety
// `embeddings` must be a live handle or null.
size_t rkdo_embeddings_dim(const struct RkdoEmbeddings *embeddings);

// Copies the `n * dim` row-major coordinates into `buffer`.
//
// # Safety
// `buffer` must point to at least `capacity` writable doubles.
enum RkdoStatus rkdo_embeddings_copy(const struct RkdoEmbeddings *embeddings,
                                     double *buffer,
                                     size_t capacity);

// Softmax kernel field of the embeddings at temperature `tau`.
//
// # Safety
// `embeddings` must be a live handle; `out` must be valid.
enum RkdoStatus rkdo_kernel_field(const struct RkdoEmbeddings *embeddings,
                                  double tau,
                                  struct RkdoField **out);

// Releases an embeddings handle; null is ignored.
//
// # Safety
// `embeddings` must be a handle returned by this library, freed at most once.
void rkdo_embeddings_free(struct RkdoEmbeddings *embeddings);

// Fills `out` with the stock configuration: alpha 0.2, depth 3, 100 steps,
// tau 0.5 annealed with beta 0.1, Adam at 0.001 with weight decay 1e-5.
//
// # Safety
// `out` must be a valid pointer.
enum RkdoStatus rkdo_train_options_default(struct RkdoTrainOptions *out);

// Trains with the recursive EMA supervisor from `p0` and `e0`.
//
// # Safety
// All handles must be live; `out` must be valid.
enum RkdoStatus rkdo_train_rkdo(const struct RkdoTrainOptions *options,
                                const struct RkdoField *p0,
                                const struct RkdoEmbeddings *e0,
                                struct RkdoTrace **out);

// Trains against the fixed target `(1 - debias) * p0 + debias * uniform`
// at constant temperature.
//
// # Safety
// All handles must be live; `out` must be valid.
enum RkdoStatus rkdo_train_icon(const struct RkdoTrainOptions *options,
                                const struct RkdoField *p0,
                                const struct RkdoEmbeddings *e0,
                                double debias,
                                struct RkdoTrace **out);

// Number of recorded steps; 0 for a null handle.
//
// # Safety
// `trace` must be a live handle or null.
size_t rkdo_trace_len(const struct RkdoTrace *trace);

// Training loss at step `index`.
//
// # Safety
// `trace` must be a live handle; `out` must be valid.
enum RkdoStatus rkdo_trace_loss(const struct RkdoTrace *trace, size_t index, double *out);

// Loss against the shared reference target at step `index`, comparable
// across methods started from the same inputs.
//
// # Safety
// `trace` must be a live handle; `out` must be valid.
enum RkdoStatus rkdo_trace_common_loss(const struct RkdoTrace *trace, size_t index, double *out);

// Loss recorded at the last step.
//
// # Safety
// `trace` must be a live handle; `out` must be valid.
enum RkdoStatus rkdo_trace_final_loss(const struct RkdoTrace *trace, double *out);

// Clones the trained embeddings out of the trace.
//
// # Safety
// `trace` must be a live handle; `out` must be valid.
enum RkdoStatus rkdo_trace_final_embeddings(const struct RkdoTrace *trace,
                                            struct RkdoEmbeddings **out);

// Bytes (including the trailing nul) needed for the trace's CSV rendering.
//
// # Safety
// `trace` must be a live handle or null (which yields 0).
size_t rkdo_trace_csv_length(const struct RkdoTrace *trace);

// Writes the trace as CSV (`step,loss,loss_vs_common_target,tau,elapsed_ms`)
// into `buffer` as a nul-terminated string.
//
// # Safety
// `buffer` must point to at least `capacity` writable bytes.
enum RkdoStatus rkdo_trace_csv(const struct RkdoTrace *trace, char *buffer, size_t capacity);

// Releases a trace handle; null is ignored.
//
// # Safety
// `trace` must be a handle returned by this library, freed at most once.
void rkdo_trace_free(struct RkdoTrace *trace);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RKDO_FFI_H */
