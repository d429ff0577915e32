#ifndef FLOWSSM_H
#define FLOWSSM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum FlowssmStatus {
  FLOWSSM_STATUS_OK = 0,
  FLOWSSM_STATUS_NULL_POINTER = 1,
  FLOWSSM_STATUS_INVALID_ARGUMENT = 2,
  FLOWSSM_STATUS_IO = 3,
  FLOWSSM_STATUS_PARSE = 4,
  FLOWSSM_STATUS_NUMERIC = 5,
  FLOWSSM_STATUS_NOT_TRAINED = 6,
  FLOWSSM_STATUS_PANIC = 7,
} FlowssmStatus;

/**
 * Which Chamfer terms drive fitting.
 */
typedef enum FlowssmLossMode {
  FLOWSSM_LOSS_MODE_SYMMETRIC = 0,
  FLOWSSM_LOSS_MODE_ONE_SIDED_DEFORMED_TO_TARGET = 1,
  FLOWSSM_LOSS_MODE_ONE_SIDED_TARGET_TO_DEFORMED = 2,
} FlowssmLossMode;

/**
 * Opaque triangle mesh.
 */
typedef struct FlowssmMesh FlowssmMesh;

/**
 * Opaque trained shape model.
 */
typedef struct FlowssmModel FlowssmModel;

/**
 * Opaque point set.
 */
typedef struct FlowssmPointSet FlowssmPointSet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *flowssm_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *flowssm_version(void);

/**
 * Loads an `.obj` or `.ply` mesh.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum FlowssmStatus flowssm_mesh_load(const char *path, struct FlowssmMesh **out);

/**
 * Builds a mesh from `n_vertices` xyz triples and `n_faces` index triples.
 *
 * # Safety
 * `vertices` must hold `3 * n_vertices` doubles and `faces` `3 * n_faces`
 * indices; `out` must be writable.
 */
enum FlowssmStatus flowssm_mesh_from_arrays(const double *vertices,
                                            size_t n_vertices,
                                            const uint32_t *faces,
                                            size_t n_faces,
                                            struct FlowssmMesh **out);

/**
 * Writes a mesh; the format follows the file extension.
 *
 * # Safety
 * `mesh` must come from this library; `path` must be NUL-terminated.
 */
enum FlowssmStatus flowssm_mesh_save(const struct FlowssmMesh *mesh, const char *path);

/**
 * # Safety
 * `mesh` must come from this library or be null.
 */
size_t flowssm_mesh_vertex_count(const struct FlowssmMesh *mesh);

/**
 * # Safety
 * `mesh` must come from this library or be null.
 */
size_t flowssm_mesh_face_count(const struct FlowssmMesh *mesh);

/**
 * Copies the vertex coordinates into `out` (`3 * vertex_count` doubles).
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum FlowssmStatus flowssm_mesh_copy_vertices(const struct FlowssmMesh *mesh,
                                              double *out,
                                              size_t len);

/**
 * Copies the face indices into `out` (`3 * face_count` values).
 *
 * # Safety
 * `out` must hold `len` values.
 */
enum FlowssmStatus flowssm_mesh_copy_faces(const struct FlowssmMesh *mesh,
                                           uint32_t *out,
                                           size_t len);

/**
 * Number of intersecting non-adjacent face pairs.
 *
 * # Safety
 * `mesh` must come from this library; `out` must be writable.
 */
enum FlowssmStatus flowssm_mesh_self_intersections(const struct FlowssmMesh *mesh, size_t *out);

/**
 * Average symmetric surface distance using `n_samples` points per surface.
 *
 * # Safety
 * Both meshes must come from this library; `out` must be writable.
 */
enum FlowssmStatus flowssm_mesh_assd(const struct FlowssmMesh *a,
                                     const struct FlowssmMesh *b,
                                     size_t n_samples,
                                     uint64_t seed,
                                     double *out);

/**
 * Area-uniform surface samples.
 *
 * # Safety
 * `mesh` must come from this library; `out` must be writable.
 */
enum FlowssmStatus flowssm_mesh_sample(const struct FlowssmMesh *mesh,
                                       size_t n,
                                       uint64_t seed,
                                       struct FlowssmPointSet **out);

/**
 * # Safety
 * `mesh` must come from this library (or be null) and not be used again.
 */
void flowssm_mesh_free(struct FlowssmMesh *mesh);

/**
 * Builds a point set from `n` xyz triples.
 *
 * # Safety
 * `points` must hold `3 * n` doubles; `out` must be writable.
 */
enum FlowssmStatus flowssm_pointset_from_array(const double *points,
                                               size_t n,
                                               struct FlowssmPointSet **out);

/**
 * # Safety
 * `points` must come from this library or be null.
 */
size_t flowssm_pointset_len(const struct FlowssmPointSet *points);

/**
 * Copies the coordinates into `out` (`3 * len` doubles).
 *
 * # Safety
 * `out` must hold `len` doubles.
 */
enum FlowssmStatus flowssm_pointset_copy(const struct FlowssmPointSet *points,
                                         double *out,
                                         size_t len);

/**
 * Chamfer distance with unsquared nearest-neighbour distances. Non-zero
 * `symmetric` averages both directions; zero measures `a` → `b` only.
 *
 * # Safety
 * Both point sets must come from this library; `out` must be writable.
 */
enum FlowssmStatus flowssm_chamfer(const struct FlowssmPointSet *a,
                                   const struct FlowssmPointSet *b,
                                   int symmetric,
                                   double *out);

/**
 * # Safety
 * `points` must come from this library (or be null) and not be used again.
 */
void flowssm_pointset_free(struct FlowssmPointSet *points);

/**
 * Loads a model checkpoint.
 *
 * # Safety
 * `path` must be NUL-terminated; `out` must be writable.
 */
enum FlowssmStatus flowssm_model_load(const char *path, struct FlowssmModel **out);

/**
 * Latent dimension `d`; 0 for null.
 *
 * # Safety
 * `model` must come from this library or be null.
 */
size_t flowssm_model_latent_dim(const struct FlowssmModel *model);

/**
 * Number of control points `M`; 0 for null.
 *
 * # Safety
 * `model` must come from this library or be null.
 */
size_t flowssm_model_control_points(const struct FlowssmModel *model);

/**
 * Copy of the model template.
 *
 * # Safety
 * `model` must come from this library; `out` must be writable.
 */
enum FlowssmStatus flowssm_model_template(const struct FlowssmModel *model,
                                          struct FlowssmMesh **out);

/**
 * Random shape drawn from the latent PCA distributions.
 *
 * # Safety
 * `model` must come from this library; `out` must be writable.
 */
enum FlowssmStatus flowssm_model_sample(const struct FlowssmModel *model,
                                        uint64_t seed,
                                        struct FlowssmMesh **out);

/**
 * Fits the model to `target` and returns the deformed template.
 * `iters` is per stage; `n_points` template samples are drawn per iteration.
 *
 * # Safety
 * `model` and `target` must come from this library; `out` must be writable.
 */
enum FlowssmStatus flowssm_model_fit(const struct FlowssmModel *model,
                                     const struct FlowssmPointSet *target,
                                     enum FlowssmLossMode loss_mode,
                                     size_t iters,
                                     double lr,
                                     size_t n_points,
                                     uint64_t seed,
                                     struct FlowssmMesh **out);

/**
 * # Safety
 * `model` must come from this library (or be null) and not be used again.
 */
void flowssm_model_free(struct FlowssmModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWSSM_H */
