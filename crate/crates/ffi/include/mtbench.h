#ifndef MTBENCH_H
#define MTBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MtbCorrelation {
  MTB_CORRELATION_PEARSON = 0,
  MTB_CORRELATION_SPEARMAN = 1,
  MTB_CORRELATION_KENDALL = 2,
} MtbCorrelation;

typedef enum MtbStatus {
  MTB_STATUS_OK = 0,
  MTB_STATUS_NULL_POINTER = 1,
  MTB_STATUS_INVALID_ARGUMENT = 2,
  MTB_STATUS_LENGTH_MISMATCH = 3,
  // Input is constant or too short for the statistic to be defined.
  MTB_STATUS_UNDEFINED = 4,
  MTB_STATUS_IO = 5,
  MTB_STATUS_CHECKSUM = 6,
  MTB_STATUS_CORRUPT = 7,
  MTB_STATUS_VERSION = 8,
  MTB_STATUS_DIMENSION_MISMATCH = 9,
  MTB_STATUS_MISSING_REFERENCE = 10,
  MTB_STATUS_EMBEDDING = 11,
  MTB_STATUS_UTF8 = 12,
  MTB_STATUS_PANIC = 13,
} MtbStatus;

// Loaded estimator checkpoint.
typedef struct MtbModel MtbModel;

// Source of token embeddings for [`mtb_model_score`].
typedef struct MtbProvider MtbProvider;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL after a success.
// The pointer stays valid until the next mtbench call on this thread.
const char *mtb_last_error(void);

// Library version as a static NUL-terminated string.
const char *mtb_version(void);

// Correlation of `x` and `y` (both length `n`) written to `*out`.
//
// # Safety
// `x` and `y` must point to `n` readable doubles; `out` must be writable.
enum MtbStatus mtb_correlation(enum MtbCorrelation kind,
                               const double *x,
                               const double *y,
                               size_t n,
                               double *out);

// # Safety
// See [`mtb_correlation`].
enum MtbStatus mtb_pearson(const double *x, const double *y, size_t n, double *out);

// # Safety
// See [`mtb_correlation`].
enum MtbStatus mtb_spearman(const double *x, const double *y, size_t n, double *out);

// Kendall tau-b.
//
// # Safety
// See [`mtb_correlation`].
enum MtbStatus mtb_kendall(const double *x, const double *y, size_t n, double *out);

// One-sided paired permutation test that `metric_a` correlates with `human`
// better than `metric_b`. Writes the observed difference and the p-value.
//
// # Safety
// The three input arrays must hold `n` doubles; the outputs must be writable.
enum MtbStatus mtb_perm_input_test(const double *metric_a,
                                   const double *metric_b,
                                   const double *human,
                                   size_t n,
                                   size_t runs,
                                   uint64_t seed,
                                   enum MtbCorrelation kind,
                                   double *delta_out,
                                   double *p_value_out);

// Rescales `values` into `out` so the minimum maps to 0 and the maximum to 1
// (every value maps to 0.5 when they are all equal). `min_out` / `max_out`
// may be NULL.
//
// # Safety
// `values` and `out` must each hold `n` doubles.
enum MtbStatus mtb_minmax_scale(const double *values,
                                size_t n,
                                double *out,
                                double *min_out,
                                double *max_out);

// Hash-seeded encoder for tests and demos; no model download needed.
//
// # Safety
// `out` must be writable.
enum MtbStatus mtb_provider_deterministic(size_t dim, uint64_t seed, struct MtbProvider **out);

// Read-only view of an embedding store directory filled by `mtbench embed-cache`.
//
// # Safety
// `dir` and `identity` must be NUL-terminated UTF-8; `out` must be writable.
enum MtbStatus mtb_provider_file_store(const char *dir,
                                       const char *identity,
                                       size_t dim,
                                       struct MtbProvider **out);

// # Safety
// `provider` must come from an `mtb_provider_*` constructor and not be freed
// already. NULL is a no-op.
void mtb_provider_free(struct MtbProvider *provider);

// Loads a checkpoint written by `mtbench train`.
//
// # Safety
// `path` must be NUL-terminated UTF-8; `out` must be writable.
enum MtbStatus mtb_model_load(const char *path, struct MtbModel **out);

// # Safety
// `model` must come from [`mtb_model_load`] and not be freed already.
// NULL is a no-op.
void mtb_model_free(struct MtbModel *model);

// Embedding width the model expects, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t mtb_model_dim(const struct MtbModel *model);

// 0 = reference-based, 1 = quality estimation, 2 = multi-task; -1 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
int32_t mtb_model_mode(const struct MtbModel *model);

// Scores one translation. `reference` may be NULL for quality-estimation
// models, or when `force_qe` asks a multi-task model for its QE head.
// `score_out` receives the [0, 1] prediction and `descaled_out` (nullable)
// the same value mapped back onto the training score range.
//
// # Safety
// Handles must be live; strings NUL-terminated UTF-8; `score_out` writable.
enum MtbStatus mtb_model_score(const struct MtbModel *model,
                               const struct MtbProvider *provider,
                               const char *src,
                               const char *mt,
                               const char *reference,
                               bool force_qe,
                               double *score_out,
                               double *descaled_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MTBENCH_H */
