#ifndef SEGINR_H
#define SEGINR_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SeginrStatus {
  SEGINR_STATUS_OK = 0,
  SEGINR_STATUS_NULL_POINTER = 1,
  SEGINR_STATUS_INVALID_ARGUMENT = 2,
  SEGINR_STATUS_IO = 3,
  SEGINR_STATUS_FORMAT = 4,
  SEGINR_STATUS_BUFFER_TOO_SMALL = 5,
  SEGINR_STATUS_PANIC = 6,
} SeginrStatus;

typedef enum SeginrDecodeMode {
  SEGINR_DECODE_MODE_STREAMING = 0,
  SEGINR_DECODE_MODE_PARALLEL = 1,
} SeginrDecodeMode;

typedef enum SeginrStopRule {
  /*
   End when `P(end) >= tau`.
   */
  SEGINR_STOP_RULE_THRESHOLD = 0,
  /*
   End when the end class is the overall argmax.
   */
  SEGINR_STOP_RULE_ARGMAX = 1,
} SeginrStopRule;

/*
 Opaque decode result handle.
 */
typedef struct SeginrDecodeResult SeginrDecodeResult;

/*
 Opaque model handle.
 */
typedef struct SeginrModel SeginrModel;

/*
 Architecture of a loaded model.
 */
typedef struct SeginrModelInfo {
  size_t input_size;
  size_t output_size;
  size_t embed_dim;
  size_t hidden;
  size_t enc_layers;
  size_t siren_layers;
  size_t window;
  double w0;
  size_t num_params;
  /*
   Id of the end-of-segment class, equal to `output_size`.
   */
  size_t end_id;
} SeginrModelInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. The pointer is
 valid until the next failing call on the same thread.
 */
const char *seginr_last_error(void);

/*
 Loads a checkpoint file. On success `*out` owns a new model.

 # Safety
 `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SeginrStatus seginr_model_load(const char *path, struct SeginrModel **out);

/*
 Creates a randomly initialised model with the default architecture.

 # Safety
 `out` must be a valid pointer.
 */
enum SeginrStatus seginr_model_init(uint64_t seed, struct SeginrModel **out);

/*
 Writes the model parameters as a checkpoint without optimiser state.

 # Safety
 `model` must come from this library and `path` be NUL-terminated.
 */
enum SeginrStatus seginr_model_save(const struct SeginrModel *model, const char *path);

/*
 # Safety
 `model` must be null or come from this library and not be freed twice.
 */
void seginr_model_free(struct SeginrModel *model);

/*
 # Safety
 `model` must come from this library and `out` be a valid pointer.
 */
enum SeginrStatus seginr_model_info(const struct SeginrModel *model, struct SeginrModelInfo *out);

/*
 Decodes `tokens[0..len]` into segments. `tau` is ignored for the argmax
 rule. On success `*out` owns a new result.

 # Safety
 `model` must come from this library, `tokens` must point to `len`
 values and `out` must be a valid pointer.
 */
enum SeginrStatus seginr_decode(const struct SeginrModel *model,
                                const size_t *tokens,
                                size_t len,
                                enum SeginrDecodeMode mode,
                                enum SeginrStopRule rule,
                                double tau,
                                size_t i_max,
                                struct SeginrDecodeResult **out);

/*
 Number of decoded output tokens.

 # Safety
 `result` must come from [`seginr_decode`].
 */
size_t seginr_result_output_len(const struct SeginrDecodeResult *result);

/*
 Decoded output tokens, `seginr_result_output_len` entries.

 # Safety
 `result` must come from [`seginr_decode`].
 */
const size_t *seginr_result_output(const struct SeginrDecodeResult *result);

/*
 Number of segments, equal to the input length.

 # Safety
 `result` must come from [`seginr_decode`].
 */
size_t seginr_result_num_segments(const struct SeginrDecodeResult *result);

/*
 Per-segment durations, `seginr_result_num_segments` entries.

 # Safety
 `result` must come from [`seginr_decode`].
 */
const size_t *seginr_result_durations(const struct SeginrDecodeResult *result);

/*
 Per-segment flags, 1 where the segment hit `i_max` without ending.

 # Safety
 `result` must come from [`seginr_decode`].
 */
const uint8_t *seginr_result_truncated(const struct SeginrDecodeResult *result);

/*
 Cells evaluated past the end of each segment (parallel mode only).

 # Safety
 `result` must come from [`seginr_decode`].
 */
size_t seginr_result_wasted(const struct SeginrDecodeResult *result);

/*
 # Safety
 `result` must be null or come from [`seginr_decode`] and not be freed twice.
 */
void seginr_result_free(struct SeginrDecodeResult *result);

/*
 Writes `P(end)` at indices `0..i_pad` of segment `u` into `p_end`, which
 must hold at least `i_pad` values.

 # Safety
 `model` must come from this library, `tokens` must point to `len`
 values and `p_end` to `capacity` writable doubles.
 */
enum SeginrStatus seginr_probe(const struct SeginrModel *model,
                               const size_t *tokens,
                               size_t len,
                               size_t u,
                               size_t i_pad,
                               double *p_end,
                               size_t capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEGINR_H */
