#ifndef CONTRAFRAUD_H
#define CONTRAFRAUD_H

/* Generated from the Rust sources; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CfStatus {
  CF_STATUS_OK = 0,
  CF_STATUS_NULL_POINTER = 1,
  CF_STATUS_INVALID_ARGUMENT = 2,
  CF_STATUS_DATA = 3,
  CF_STATUS_DEGENERATE = 4,
  CF_STATUS_CHECKPOINT = 5,
  CF_STATUS_CONFIG_MISMATCH = 6,
  CF_STATUS_IO = 7,
  CF_STATUS_NUMERIC = 8,
  CF_STATUS_PANIC = 9,
} CfStatus;

typedef enum CfSide {
  /**
   * Fraud declarations; null accounts are non-fraud.
   */
  CF_SIDE_HIGH = 0,
  /**
   * Non-fraud declarations; null accounts are fraud.
   */
  CF_SIDE_LOW = 1,
} CfSide;

typedef enum CfEstimator {
  CF_ESTIMATOR_STRICT = 0,
  CF_ESTIMATOR_CONSERVATIVE = 1,
} CfEstimator;

/**
 * A frozen encoder loaded from a checkpoint.
 */
typedef struct CfEncoder CfEncoder;

/**
 * Labeled scores.
 */
typedef struct CfScoreSet CfScoreSet;

/**
 * Summary of one side of the two-threshold procedure.
 */
typedef struct CfDecision {
  /**
   * Number of rejections; 0 when BH found no crossing.
   */
  size_t bh_index;
  /**
   * Valid only when `has_threshold` is nonzero.
   */
  double threshold;
  uint8_t has_threshold;
  /**
   * Level handed to BH; the corrected level on the low side.
   */
  double bh_level;
  size_t false_discoveries;
  double realized_fdp;
} CfDecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the calling thread's last error message, excluding the
 * terminating NUL.
 */
size_t cf_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len - 1` bytes). Returns the full message length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t cf_last_error_message(char *buf, size_t len);

/**
 * Builds a score set; account `i` is named by its index.
 *
 * # Safety
 * `scores` and `labels` must point to `n` readable values; `out_set` must
 * be writable.
 */
enum CfStatus cf_score_set_new(const double *scores,
                               const uint8_t *labels,
                               size_t n,
                               struct CfScoreSet **out_set);

/**
 * # Safety
 * `set` must be null or a handle from [`cf_score_set_new`] not yet freed.
 */
void cf_score_set_free(struct CfScoreSet *set);

/**
 * Leave-one-out p-values of every account, in input order.
 *
 * # Safety
 * `set` must be a live handle; `out_p` must hold as many values as the set.
 */
enum CfStatus cf_pvalues(const struct CfScoreSet *set,
                         enum CfSide which,
                         enum CfEstimator est,
                         double *out_p);

/**
 * Number of BH rejections at `level`; 0 when nothing crosses.
 *
 * # Safety
 * `p` must point to `n` readable values; `out_index` must be writable.
 */
enum CfStatus cf_bh_index(const double *p, size_t n, double level, size_t *out_index);

/**
 * Corrected low-side level; `out_capped` is set to 1 when it was capped at 1.
 *
 * # Safety
 * `labels` must point to `n` readable values; both outputs must be writable.
 */
enum CfStatus cf_adjust_alpha_low(double alpha,
                                  const uint8_t *labels,
                                  size_t n,
                                  double *out_level,
                                  uint8_t *out_capped);

/**
 * Both thresholds with leave-one-out p-values on the set itself.
 *
 * # Safety
 * `set` must be a live handle; `high` and `low` must be writable.
 */
enum CfStatus cf_thresholds(const struct CfScoreSet *set,
                            double alpha_high,
                            double alpha_low,
                            enum CfEstimator est,
                            struct CfDecision *high,
                            struct CfDecision *low);

/**
 * Effective rank of a row-major `rows x cols` matrix.
 *
 * # Safety
 * `data` must point to `rows * cols` readable values; `out_rank` must be
 * writable.
 */
enum CfStatus cf_rankme(const double *data, size_t rows, size_t cols, double *out_rank);

/**
 * Loads an encoder checkpoint written with the architecture in the pipeline
 * configuration at `config_path`, for inputs of width `d_input`.
 *
 * # Safety
 * Both paths must be NUL-terminated strings; `out_encoder` must be writable.
 */
enum CfStatus cf_encoder_load(const char *config_path,
                              const char *checkpoint_path,
                              size_t d_input,
                              struct CfEncoder **out_encoder);

/**
 * # Safety
 * `enc` must be null or a handle from [`cf_encoder_load`] not yet freed.
 */
void cf_encoder_free(struct CfEncoder *enc);

/**
 * Width of the representation [`cf_encoder_embed`] writes; 0 for null.
 *
 * # Safety
 * `enc` must be null or a live handle.
 */
size_t cf_encoder_latent_dim(const struct CfEncoder *enc);

/**
 * Input width the encoder expects; 0 for null.
 *
 * # Safety
 * `enc` must be null or a live handle.
 */
size_t cf_encoder_input_dim(const struct CfEncoder *enc);

/**
 * Representation of one encoded series of `len` events stored row-major
 * with `width` columns each.
 *
 * # Safety
 * `events` must point to `len * width` readable values and `out_u` to
 * [`cf_encoder_latent_dim`] writable values.
 */
enum CfStatus cf_encoder_embed(const struct CfEncoder *enc,
                               const double *events,
                               size_t len,
                               size_t width,
                               double *out_u);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONTRAFRAUD_H */
