#ifndef MCWB_H
#define MCWB_H

/* Generated by cbindgen from mcwb-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every C-ABI call.
 */
typedef enum McwbStatus {
  /**
   * Success; out-parameters are valid.
   */
  MCWB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  MCWB_STATUS_NULL_POINTER = 1,
  /**
   * Argument values were rejected (dimension mismatch, bad UTF-8, ...).
   */
  MCWB_STATUS_INVALID_INPUT = 2,
  /**
   * The file could not be read or written.
   */
  MCWB_STATUS_IO = 3,
  /**
   * The model file failed validation (magic, checksum, layout).
   */
  MCWB_STATUS_CORRUPT_MODEL = 4,
  /**
   * The model lacks the section this call needs (e.g. no mapper).
   */
  MCWB_STATUS_MISSING_SECTION = 5,
  /**
   * An internal panic was caught; treat the handle as poisoned.
   */
  MCWB_STATUS_PANIC = 6,
} McwbStatus;

/**
 * Opaque trained-model handle.
 */
typedef struct McwbModel McwbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Load a model file into a fresh handle.
 *
 * On success `*out` owns the handle; release it with `mcwb_model_free`.
 *
 * # Safety
 * `path` must point to a NUL-terminated string and `out` to writable
 * storage for one pointer.
 */
enum McwbStatus mcwb_model_load(const char *path, struct McwbModel **out);

/**
 * Write the model to a file in the container format.
 *
 * # Safety
 * `model` must be a live handle from `mcwb_model_load` and `path` a
 * NUL-terminated string.
 */
enum McwbStatus mcwb_model_save(const struct McwbModel *model, const char *path);

/**
 * Release a handle. Null is a no-op; a handle must be freed exactly once.
 *
 * # Safety
 * `model` must be null or a live handle from `mcwb_model_load`.
 */
void mcwb_model_free(struct McwbModel *model);

/**
 * Number of classes the boosted mapper predicts.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum McwbStatus mcwb_model_num_classes(const struct McwbModel *model, size_t *out);

/**
 * Length of the raw-patch sample vector the mapper expects.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum McwbStatus mcwb_model_sample_dim(const struct McwbModel *model, size_t *out);

/**
 * Number of boosting stages in the mapper.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum McwbStatus mcwb_model_stages(const struct McwbModel *model, size_t *out);

/**
 * Early-exit threshold the model was configured with.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum McwbStatus mcwb_model_alpha(const struct McwbModel *model, double *out);

/**
 * Full-ensemble class scores for one L1-normalized sample.
 *
 * `sample_len` must equal the model's sample dimension and `scores_len` the
 * number of classes; scores are written in class order.
 *
 * # Safety
 * `model` must be a live handle, `sample` readable for `sample_len` doubles
 * and `scores` writable for `scores_len` doubles.
 */
enum McwbStatus mcwb_predict_strong(const struct McwbModel *model,
                                    const double *sample,
                                    size_t sample_len,
                                    double *scores,
                                    size_t scores_len);

/**
 * Early-exit prediction for one L1-normalized sample.
 *
 * Writes the predicted class to `class_out`; `stages_out` (stages actually
 * evaluated) and `confidence_out` (final stopping confidence) may be null.
 *
 * # Safety
 * `model` must be a live handle, `sample` readable for `sample_len` doubles,
 * `class_out` writable, and `stages_out` / `confidence_out` each null or
 * writable.
 */
enum McwbStatus mcwb_predict_early_exit(const struct McwbModel *model,
                                        const double *sample,
                                        size_t sample_len,
                                        double alpha,
                                        size_t *class_out,
                                        size_t *stages_out,
                                        double *confidence_out);

/**
 * Copy the calling thread's last error message into `buf`.
 *
 * Returns the message length in bytes (without the NUL). When `buf` is
 * non-null and `len > 0`, writes at most `len - 1` bytes plus a NUL. The
 * message describes the most recent non-OK return on this thread.
 *
 * # Safety
 * `buf` must be null or writable for `len` bytes.
 */
size_t mcwb_last_error(char *buf, size_t len);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* MCWB_H */
