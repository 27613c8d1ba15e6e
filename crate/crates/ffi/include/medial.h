#ifndef MEDIAL_H
#define MEDIAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum MedialStatus {
  MEDIAL_STATUS_OK = 0,
  MEDIAL_STATUS_INVALID_ARGUMENT = 1,
  MEDIAL_STATUS_PARSE = 2,
  MEDIAL_STATUS_NUMERICAL = 3,
  MEDIAL_STATUS_EMPTY = 4,
  MEDIAL_STATUS_IO = 5,
  MEDIAL_STATUS_UNSUPPORTED = 6,
  MEDIAL_STATUS_NULL_POINTER = 7,
  MEDIAL_STATUS_PANIC = 8,
} MedialStatus;

/**
 * Paired signed distance and medial fields.
 */
typedef struct MedialFields MedialFields;

/**
 * Medial membrane: a mesh with a radius per vertex.
 */
typedef struct MedialMembrane MedialMembrane;

/**
 * Triangle mesh.
 */
typedef struct MedialMesh MedialMesh;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failure on this thread, or null. The pointer stays
 * valid until the next call into the library from this thread.
 */
const char *medial_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *medial_version(void);

/**
 * Fields from a `.scene` shape, a `.ckpt` network, or an oriented cloud or
 * mesh file (meshes are sampled with `samples` points drawn from `seed`).
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MedialStatus medial_fields_load(const char *path,
                                     size_t samples,
                                     uint64_t seed,
                                     struct MedialFields **out);

/**
 * Exact fields of a sphere.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum MedialStatus medial_fields_sphere(double cx,
                                       double cy,
                                       double cz,
                                       double radius,
                                       struct MedialFields **out);

/**
 * Evaluates the fields at `count` points given as packed `xyz` triples.
 * Either output array may be null; non-null ones receive `count` values.
 * `qmdf_out`, if non-null, receives `mf − |sdf|`.
 *
 * # Safety
 * `points` must hold `3·count` doubles and each non-null output `count`.
 */
enum MedialStatus medial_fields_eval(const struct MedialFields *fields,
                                     const double *points,
                                     size_t count,
                                     double *sdf_out,
                                     double *mf_out,
                                     double *qmdf_out);

/**
 * # Safety
 * `fields` must be null or a handle from this library, freed at most once.
 */
void medial_fields_free(struct MedialFields *fields);

/**
 * Reads an OBJ or PLY mesh.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MedialStatus medial_mesh_load(const char *path, struct MedialMesh **out);

/**
 * Writes a mesh; the format follows the extension.
 *
 * # Safety
 * `mesh` must be a live handle and `path` a NUL-terminated string.
 */
enum MedialStatus medial_mesh_save(const struct MedialMesh *mesh, const char *path);

/**
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t medial_mesh_vertex_count(const struct MedialMesh *mesh);

/**
 * # Safety
 * `mesh` must be null or a live handle.
 */
size_t medial_mesh_face_count(const struct MedialMesh *mesh);

/**
 * Copies vertex positions as packed `xyz` triples into `out`, which must
 * hold `3 · medial_mesh_vertex_count` doubles.
 *
 * # Safety
 * `mesh` must be a live handle and `out` large enough.
 */
enum MedialStatus medial_mesh_vertices(const struct MedialMesh *mesh, double *out);

/**
 * Copies triangle vertex indices into `out`, which must hold
 * `3 · medial_mesh_face_count` entries.
 *
 * # Safety
 * `mesh` must be a live handle and `out` large enough.
 */
enum MedialStatus medial_mesh_faces(const struct MedialMesh *mesh, uint32_t *out);

/**
 * Euler characteristic `V − E + F`.
 *
 * # Safety
 * `mesh` must be null or a live handle.
 */
int64_t medial_mesh_euler_characteristic(const struct MedialMesh *mesh);

/**
 * # Safety
 * `mesh` must be null or a handle from this library, freed at most once.
 */
void medial_mesh_free(struct MedialMesh *mesh);

/**
 * Extracts the `epsilon` cover on a grid with `2^depth` points along the
 * longest axis.
 *
 * # Safety
 * `fields` must be a live handle and `out` a valid pointer.
 */
enum MedialStatus medial_extract(const struct MedialFields *fields,
                                 double epsilon,
                                 uint32_t depth,
                                 struct MedialMesh **out);

/**
 * Collapses a cover to a membrane with at most `iterations` descent steps.
 *
 * # Safety
 * `cover` and `fields` must be live handles and `out` a valid pointer.
 */
enum MedialStatus medial_shrink(const struct MedialMesh *cover,
                                const struct MedialFields *fields,
                                size_t iterations,
                                struct MedialMembrane **out);

/**
 * Reads a `.ma` membrane.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MedialStatus medial_membrane_load(const char *path, struct MedialMembrane **out);

/**
 * Writes a `.ma` membrane.
 *
 * # Safety
 * `membrane` must be a live handle and `path` a NUL-terminated string.
 */
enum MedialStatus medial_membrane_save(const struct MedialMembrane *membrane, const char *path);

/**
 * # Safety
 * `membrane` must be null or a live handle.
 */
size_t medial_membrane_vertex_count(const struct MedialMembrane *membrane);

/**
 * Copies per-vertex radii into `out`, which must hold
 * `medial_membrane_vertex_count` doubles.
 *
 * # Safety
 * `membrane` must be a live handle and `out` large enough.
 */
enum MedialStatus medial_membrane_radii(const struct MedialMembrane *membrane, double *out);

/**
 * The membrane's mesh as a new handle.
 *
 * # Safety
 * `membrane` must be a live handle and `out` a valid pointer.
 */
enum MedialStatus medial_membrane_mesh(const struct MedialMembrane *membrane,
                                       struct MedialMesh **out);

/**
 * Surface enveloped by the membrane, on a lattice with `resolution`
 * points along the longest axis.
 *
 * # Safety
 * `membrane` must be a live handle and `out` a valid pointer.
 */
enum MedialStatus medial_reconstruct(const struct MedialMembrane *membrane,
                                     size_t resolution,
                                     struct MedialMesh **out);

/**
 * # Safety
 * `membrane` must be null or a handle from this library, freed at most once.
 */
void medial_membrane_free(struct MedialMembrane *membrane);

/**
 * Runs the whole pipeline from configuration text (`key=value` lines),
 * writing artifacts to the configured output directory.
 *
 * # Safety
 * `config` must be a NUL-terminated string.
 */
enum MedialStatus medial_pipeline_run(const char *config);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MEDIAL_H */
