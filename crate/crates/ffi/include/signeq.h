#ifndef SIGNEQ_H
#define SIGNEQ_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum SigneqStatus {
  SIGNEQ_STATUS_OK = 0,
  SIGNEQ_STATUS_NULL_POINTER = 1,
  SIGNEQ_STATUS_INVALID_ARGUMENT = 2,
  SIGNEQ_STATUS_SHAPE_MISMATCH = 3,
  SIGNEQ_STATUS_BUFFER_TOO_SMALL = 4,
  SIGNEQ_STATUS_OVERFLOW = 5,
  SIGNEQ_STATUS_PANIC = 6,
} SigneqStatus;

// A model with its parameters. Create with [`signeq_model_new`] and release
// with [`signeq_model_free`].
typedef struct SigneqModel SigneqModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *signeq_version(void);

// Copies the calling thread's last error message into `buf` (NUL
// terminated, truncated to fit) and returns the full message length.
//
// # Safety
// `buf` must be null or valid for `len` bytes.
size_t signeq_last_error(char *buf, size_t len);

// Builds a model from a JSON spec such as
// `{"arch":"sign_eq_elementwise","k":4,"widths":[16,16]}` and initialises
// its parameters from `seed`.
//
// # Safety
// `spec_json` must be a NUL-terminated string and `out` a valid pointer.
enum SigneqStatus signeq_model_new(const char *spec_json, uint64_t seed, struct SigneqModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from [`signeq_model_new`] and not be freed twice.
void signeq_model_free(struct SigneqModel *model);

// Number of scalar parameters.
//
// # Safety
// `model` must be a live handle and `out` a valid pointer.
enum SigneqStatus signeq_model_param_count(const struct SigneqModel *model, size_t *out);

// Writes the model's spec as JSON into `buf`, like [`signeq_last_error`].
//
// # Safety
// `model` must be a live handle, `buf` null or valid for `len` bytes, and
// `needed` a valid pointer.
enum SigneqStatus signeq_model_spec(const struct SigneqModel *model,
                                    char *buf,
                                    size_t len,
                                    size_t *needed);

// Runs the model on a row-major input of the given shape.
//
// On return `*out_len` holds the number of output values and, when
// `out_shape` is non-null, up to `out_shape_cap` output dimensions are
// written there with the rank in `*out_rank`. If `out` is null or smaller
// than the result, nothing is copied and `BufferTooSmall` is returned with
// the required length, so callers can size the buffer with a first call.
//
// # Safety
// All non-null pointers must be valid for the stated lengths; `model`,
// `input`, `shape` and `out_len` must be non-null.
enum SigneqStatus signeq_model_forward(const struct SigneqModel *model,
                                       const double *input,
                                       const size_t *shape,
                                       size_t rank,
                                       double *out,
                                       size_t out_cap,
                                       size_t *out_len,
                                       size_t *out_shape,
                                       size_t out_shape_cap,
                                       size_t *out_rank);

// Dimension of the space of sign-equivariant linear maps between order
// `m1` and order `m2` tensors over `k` eigenvectors.
//
// # Safety
// `out` must be a valid pointer.
enum SigneqStatus signeq_fixed_dim(uint32_t k, uint32_t m1, uint32_t m2, uint64_t *out);

// Runs the property suite; `*passed` is set to 1 when every check passes.
// A nonzero `quick` uses small sample counts.
//
// # Safety
// `passed` must be a valid pointer.
enum SigneqStatus signeq_check(uint64_t seed, int32_t quick, int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGNEQ_H */
