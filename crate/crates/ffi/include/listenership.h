#ifndef LISTENERSHIP_H
#define LISTENERSHIP_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LsStatus {
  LS_OK = 0,
  LS_ERR_NULL_POINTER = 1,
  LS_ERR_CONFIG = 2,
  LS_ERR_IO = 3,
  LS_ERR_DATA = 4,
  LS_ERR_SHAPE = 5,
  LS_ERR_UNDEFINED_METRIC = 6,
  LS_ERR_INTERNAL = 7,
} LsStatus;

/**
 * A generated synthetic cohort and its weekly trajectories.
 */
typedef struct LsCohort LsCohort;

/**
 * A trained classifier loaded from disk.
 */
typedef struct LsModel LsModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next library call on the same thread.
 */
const char *ls_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ls_version(void);

/**
 * ROC AUC of `scores` against 0/1 `labels`, ties counted as one half.
 *
 * # Safety
 * `labels` and `scores` must point to `n` readable elements; `out` must be writable.
 */
enum LsStatus ls_auc(const uint8_t *labels, const double *scores, size_t n, double *out);

/**
 * Balanced accuracy predicting positive at `score >= threshold`.
 *
 * # Safety
 * As [`ls_auc`].
 */
enum LsStatus ls_balanced_accuracy(const uint8_t *labels,
                                   const double *scores,
                                   size_t n,
                                   double threshold,
                                   double *out);

/**
 * Precision among the top `ceil(n * k_percent / 100)` scores.
 *
 * # Safety
 * As [`ls_auc`].
 */
enum LsStatus ls_precision_at_k(const uint8_t *labels,
                                const double *scores,
                                size_t n,
                                double k_percent,
                                double *out);

/**
 * Generates a cohort from a JSON cohort config.
 *
 * # Safety
 * `config_json` must be a NUL-terminated string; `out` must be writable.
 */
enum LsStatus ls_cohort_generate(const char *config_json, struct LsCohort **out);

/**
 * Generates the default four-archetype cohort of `n_beneficiaries`.
 *
 * # Safety
 * `out` must be writable.
 */
enum LsStatus ls_cohort_generate_default(size_t n_beneficiaries,
                                         uint64_t seed,
                                         struct LsCohort **out);

/**
 * Number of call-attempt records, or 0 for a null handle.
 *
 * # Safety
 * `cohort` must be null or a live handle.
 */
size_t ls_cohort_record_count(const struct LsCohort *cohort);

/**
 * Number of beneficiaries, or 0 for a null handle.
 *
 * # Safety
 * `cohort` must be null or a live handle.
 */
size_t ls_cohort_beneficiary_count(const struct LsCohort *cohort);

/**
 * Share of attempted beneficiary-weeks never picked up.
 *
 * # Safety
 * `cohort` must be a live handle; `out` must be writable.
 */
enum LsStatus ls_cohort_never_reached(const struct LsCohort *cohort, double *out);

/**
 * Writes the cohort's call records as CSV in the ingest schema.
 *
 * # Safety
 * `cohort` must be a live handle; `path` a NUL-terminated string.
 */
enum LsStatus ls_cohort_write_csv(const struct LsCohort *cohort, const char *path);

/**
 * Releases a cohort handle. Null is ignored.
 *
 * # Safety
 * `cohort` must be null or a handle not yet freed.
 */
void ls_cohort_free(struct LsCohort *cohort);

/**
 * Loads a model from its JSON manifest (the weight blob sits beside it).
 *
 * # Safety
 * `manifest_path` must be a NUL-terminated string; `out` must be writable.
 */
enum LsStatus ls_model_load(const char *manifest_path, struct LsModel **out);

/**
 * Feature columns the model expects, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t ls_model_input_dim(const struct LsModel *model);

/**
 * Scores `n_rows` standardized row-major feature rows into `out_scores`.
 *
 * # Safety
 * `features` must hold `n_rows * n_cols` values; `out_scores` room for `n_rows`.
 */
enum LsStatus ls_model_score(const struct LsModel *model,
                             const double *features,
                             size_t n_rows,
                             size_t n_cols,
                             double *out_scores);

/**
 * As [`ls_model_score`], but standardizes raw features with the model's
 * stored training statistics first.
 *
 * # Safety
 * As [`ls_model_score`].
 */
enum LsStatus ls_model_score_raw(const struct LsModel *model,
                                 const double *features,
                                 size_t n_rows,
                                 size_t n_cols,
                                 double *out_scores);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must be null or a handle not yet freed.
 */
void ls_model_free(struct LsModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LISTENERSHIP_H */
