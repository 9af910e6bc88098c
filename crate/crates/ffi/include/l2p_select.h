#ifndef L2P_SELECT_H
#define L2P_SELECT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum L2pStatus {
  L2P_STATUS_OK = 0,
  L2P_STATUS_NULL_POINTER = 1,
  L2P_STATUS_INVALID_ARGUMENT = 2,
  L2P_STATUS_IO = 3,
  L2P_STATUS_PARSE = 4,
  L2P_STATUS_NUMERICAL = 5,
  L2P_STATUS_BUFFER_TOO_SMALL = 6,
  L2P_STATUS_PANIC = 7,
} L2pStatus;

/**
 * Opaque labeled dataset.
 */
typedef struct L2pDataset L2pDataset;

/**
 * Opaque outcome of one selection run.
 */
typedef struct L2pResult L2pResult;

/**
 * Solver settings. Obtain defaults from [`l2p_config_default`].
 */
typedef struct L2pConfig {
  double p;
  size_t max_iterations;
  double tolerance;
  double weight_floor;
  size_t d;
} L2pConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *l2p_last_error_message(void);

struct L2pConfig l2p_config_default(void);

/**
 * Builds a dataset from a row-major `rows × cols` feature block and 1-based
 * class labels.
 *
 * # Safety
 * `features` must point to `rows * cols` doubles and `labels` to `rows`
 * values; `out` must be writable.
 */
enum L2pStatus l2p_dataset_from_dense(const double *features,
                                      size_t rows,
                                      size_t cols,
                                      const size_t *labels,
                                      size_t class_count,
                                      struct L2pDataset **out);

/**
 * Reads a dense CSV file whose last column holds the class label.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum L2pStatus l2p_dataset_read_csv(const char *path, bool has_header, struct L2pDataset **out);

/**
 * Standardizes every feature to zero mean and unit variance, in place.
 *
 * # Safety
 * `dataset` must be a live handle.
 */
enum L2pStatus l2p_dataset_normalize(struct L2pDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a live handle; `rows` and `cols` must be writable.
 */
enum L2pStatus l2p_dataset_shape(const struct L2pDataset *dataset, size_t *rows, size_t *cols);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void l2p_dataset_free(struct L2pDataset *dataset);

/**
 * Runs the selector. A run that hits the iteration budget still succeeds;
 * check [`l2p_result_converged`].
 *
 * # Safety
 * `dataset` and `config` must be valid; `out` must be writable.
 */
enum L2pStatus l2p_select(const struct L2pDataset *dataset,
                          const struct L2pConfig *config,
                          struct L2pResult **out);

/**
 * Copies the selected features (0-based, best first) into `buffer`. The
 * required length is stored in `written` even when the buffer is too small.
 *
 * # Safety
 * `buffer` must hold `capacity` values; `written` must be writable.
 */
enum L2pStatus l2p_result_selected(const struct L2pResult *result,
                                   size_t *buffer,
                                   size_t capacity,
                                   size_t *written);

/**
 * Copies every feature's weight row norm, indexed by 0-based feature.
 *
 * # Safety
 * As for [`l2p_result_selected`].
 */
enum L2pStatus l2p_result_row_norms(const struct L2pResult *result,
                                    double *buffer,
                                    size_t capacity,
                                    size_t *written);

/**
 * Final objective value, or NaN for a null handle.
 *
 * # Safety
 * `result` must be null or a live handle.
 */
double l2p_result_objective(const struct L2pResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
size_t l2p_result_iterations(const struct L2pResult *result);

/**
 * # Safety
 * `result` must be null or a live handle.
 */
bool l2p_result_converged(const struct L2pResult *result);

/**
 * # Safety
 * `result` must be null or a handle not yet freed.
 */
void l2p_result_free(struct L2pResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* L2P_SELECT_H */
