#ifndef QEK_H
#define QEK_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QekStatus {
  QEK_STATUS_OK = 0,
  QEK_STATUS_NULL_POINTER = 1,
  QEK_STATUS_INVALID_ARGUMENT = 2,
  QEK_STATUS_DIMENSION_MISMATCH = 3,
  QEK_STATUS_NUMERIC_FAILURE = 4,
  QEK_STATUS_PANIC = 5,
} QekStatus;

typedef enum QekArchitecture {
  QEK_ARCHITECTURE_DATA_FIRST = 0,
  QEK_ARCHITECTURE_DATA_LAST = 1,
  QEK_ARCHITECTURE_DATA_WEAVED = 2,
} QekArchitecture;

/**
 * Ansatz plus its current parameter vector.
 */
typedef struct QekModel QekModel;

/**
 * One-vs-rest SVM fitted on a precomputed kernel.
 */
typedef struct QekSvm QekSvm;

typedef struct QekGateCounts {
  size_t one_qubit;
  size_t two_qubit;
} QekGateCounts;

typedef struct QekEraseReport {
  struct QekGateCounts before;
  struct QekGateCounts after;
  size_t erased;
  double max_deviation;
  bool passed;
} QekEraseReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qek_version(void);

/**
 * Message of the last failure on this thread; empty if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *qek_last_error(void);

/**
 * Creates a model with all parameters set to zero.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle.
 */
enum QekStatus qek_model_new(enum QekArchitecture arch,
                             size_t n_qubits,
                             size_t n_layers,
                             double feature_scale,
                             struct QekModel **out);

/**
 * # Safety
 * `model` must be null or a handle from [`qek_model_new`] not yet freed.
 */
void qek_model_free(struct QekModel *model);

/**
 * Number of trainable parameters, or 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t qek_model_param_count(const struct QekModel *model);

/**
 * # Safety
 * `out` must point to `len` writable doubles; `len` must equal the
 * parameter count.
 */
enum QekStatus qek_model_get_params(const struct QekModel *model, double *out, size_t len);

/**
 * # Safety
 * `params` must point to `len` readable doubles.
 */
enum QekStatus qek_model_set_params(struct QekModel *model, const double *params, size_t len);

/**
 * Draws parameters uniformly from `[0, 2π)` with the given seed.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum QekStatus qek_model_init_params(struct QekModel *model, uint64_t seed);

/**
 * Gate counts of the model's ansatz.
 *
 * # Safety
 * `out` must point to writable storage for one [`QekGateCounts`].
 */
enum QekStatus qek_gate_counts(const struct QekModel *model, struct QekGateCounts *out);

/**
 * Kernel value between two feature vectors of length `n_qubits`.
 *
 * # Safety
 * `x` and `x_prime` must point to `len` doubles; `out` to one double.
 */
enum QekStatus qek_kernel_value(const struct QekModel *model,
                                const double *x,
                                const double *x_prime,
                                size_t len,
                                double *out);

/**
 * Gram matrix of `n_points` row-major points of width `n_features`,
 * written to `out` (`n_points × n_points`).
 *
 * # Safety
 * `points` must hold `n_points * n_features` doubles and `out`
 * `n_points * n_points`.
 */
enum QekStatus qek_kernel_matrix(const struct QekModel *model,
                                 const double *points,
                                 size_t n_points,
                                 size_t n_features,
                                 double *out);

/**
 * Kernel-target alignment of an `n × n` kernel matrix with class labels.
 *
 * # Safety
 * `kernel` must hold `n * n` doubles, `labels` `n` values, `out` one double.
 */
enum QekStatus qek_target_alignment(const double *kernel,
                                    const uint32_t *labels,
                                    size_t n,
                                    double *out);

/**
 * Runs the erasure pass on the echo circuit of the given ansatz and checks
 * `trials` random bindings for unchanged kernel values.
 *
 * # Safety
 * `out` must point to writable storage for one [`QekEraseReport`].
 */
enum QekStatus qek_erase_check(enum QekArchitecture arch,
                               size_t n_qubits,
                               size_t n_layers,
                               size_t trials,
                               uint64_t seed,
                               struct QekEraseReport *out);

/**
 * Fits a one-vs-rest SVM on an `n × n` training kernel.
 *
 * # Safety
 * `kernel` must hold `n * n` doubles, `labels` `n` values and `out` must
 * be writable storage for one handle.
 */
enum QekStatus qek_svm_fit(const double *kernel,
                           const uint32_t *labels,
                           size_t n,
                           double c,
                           struct QekSvm **out);

/**
 * Predicts labels from an `n_rows × n_train` cross-kernel block.
 *
 * # Safety
 * `k_cross` must hold `n_rows * n_train` doubles and `out_labels`
 * `n_rows` values.
 */
enum QekStatus qek_svm_predict(const struct QekSvm *svm,
                               const double *k_cross,
                               size_t n_rows,
                               size_t n_train,
                               uint32_t *out_labels);

/**
 * # Safety
 * `svm` must be null or a handle from [`qek_svm_fit`] not yet freed.
 */
void qek_svm_free(struct QekSvm *svm);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QEK_H */
