#ifndef DIFFMAP_H
#define DIFFMAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum DmStatus {
  DmOk = 0,
  DmErrNullPointer = 1,
  DmErrInvalidArgument = 2,
  DmErrIo = 3,
  DmErrNumeric = 4,
} DmStatus;

/**
 * Opaque point-cloud handle.
 */
typedef struct DmCloud DmCloud;

/**
 * Opaque model handle: affinity graph spectrum ready for embedding,
 * distances and clustering.
 */
typedef struct DmModel DmModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on the calling thread, or null.
 * Valid until the next failing call on the same thread.
 */
const char *dm_last_error(void);

/**
 * Loads a cloud from a headered CSV file (`x0,...,x{p-1}[,label]`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum DmStatus dm_cloud_from_csv(const char *path, struct DmCloud **out);

/**
 * Builds a cloud from a row-major `n x dim` buffer.
 *
 * # Safety
 * `data` must point to `n * dim` doubles; `out` must be valid.
 */
enum DmStatus dm_cloud_from_data(const double *data,
                                 uintptr_t n,
                                 uintptr_t dim,
                                 struct DmCloud **out);

/**
 * # Safety
 * `cloud` must come from a `dm_cloud_*` constructor and not be freed twice.
 */
void dm_cloud_free(struct DmCloud *cloud);

/**
 * Number of points.
 *
 * # Safety
 * `cloud` must be a live handle.
 */
uintptr_t dm_cloud_len(const struct DmCloud *cloud);

/**
 * Ambient dimension.
 *
 * # Safety
 * `cloud` must be a live handle.
 */
uintptr_t dm_cloud_dim(const struct DmCloud *cloud);

/**
 * Builds the random-walk spectrum of a cloud.
 *
 * `epsilon <= 0` selects the median-of-squared-distances rule; `modes` is
 * the number of retained eigenpairs (>= 2).
 *
 * # Safety
 * `cloud` must be a live handle and `out` a valid pointer.
 */
enum DmStatus dm_model_build(const struct DmCloud *cloud,
                             double epsilon,
                             uintptr_t modes,
                             struct DmModel **out);

/**
 * # Safety
 * `model` must come from `dm_model_build` and not be freed twice.
 */
void dm_model_free(struct DmModel *model);

/**
 * Number of retained eigenpairs.
 *
 * # Safety
 * `model` must be a live handle.
 */
uintptr_t dm_model_modes(const struct DmModel *model);

/**
 * Kernel scale the model was built with.
 *
 * # Safety
 * `model` must be a live handle.
 */
double dm_model_epsilon(const struct DmModel *model);

/**
 * Copies the eigenvalues (descending, starting at 1) into `out`.
 *
 * # Safety
 * `out` must hold `len` doubles; `model` must be a live handle.
 */
enum DmStatus dm_model_eigenvalues(const struct DmModel *model, double *out, uintptr_t len);

/**
 * Writes the `n x k` diffusion-map embedding at time `t`, row-major.
 *
 * # Safety
 * `out` must hold `n * k` doubles; `model` must be a live handle.
 */
enum DmStatus dm_model_embed(const struct DmModel *model, double t, uintptr_t k, double *out);

/**
 * Diffusion distance between points `i` and `j` at time `t`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum DmStatus dm_model_distance(const struct DmModel *model,
                                uintptr_t i,
                                uintptr_t j,
                                double t,
                                double *out);

/**
 * k-means cluster labels in diffusion coordinates at time `t`.
 *
 * # Safety
 * `labels_out` must hold `n` entries; `model` must be a live handle.
 */
enum DmStatus dm_model_cluster(const struct DmModel *model,
                               uintptr_t k,
                               double t,
                               uint64_t seed,
                               uint32_t *labels_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIFFMAP_H */
