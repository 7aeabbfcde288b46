#ifndef POSEFORGE_H
#define POSEFORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PfStatus {
  PF_STATUS_OK = 0,
  PF_STATUS_NULL_POINTER = 1,
  PF_STATUS_INVALID_ARGUMENT = 2,
  PF_STATUS_INVALID_ROTATION = 3,
  PF_STATUS_BEHIND_CAMERA = 4,
  PF_STATUS_PARSE = 5,
  PF_STATUS_IO = 6,
  PF_STATUS_UNKNOWN_OBJECT = 7,
  PF_STATUS_DUPLICATE_OBJECT = 8,
  PF_STATUS_RENDER = 9,
  PF_STATUS_PANIC = 10,
} PfStatus;

typedef enum PfCamera {
  PF_CAMERA_ORIGINAL = 0,
  PF_CAMERA_SCENE = 1,
} PfCamera;

// Opaque triangle mesh.
typedef struct PfMesh PfMesh;

// Opaque scene: intrinsics, background and posed objects.
typedef struct PfScene PfScene;

typedef struct PfIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
  uint32_t width;
  uint32_t height;
} PfIntrinsics;

// Row-major 4x4 rigid transform; the bottom row must be `0 0 0 1`.
typedef struct PfTransform {
  double m[16];
} PfTransform;

typedef struct PfVec3 {
  double x;
  double y;
  double z;
} PfVec3;

typedef struct PfPixel {
  double u;
  double v;
} PfPixel;

// Bytes allocated by the library; release with [`pf_buffer_free`].
typedef struct PfBuffer {
  uint8_t *data;
  size_t len;
} PfBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; valid until the next
// call into the library from the same thread. Never null.
const char *pf_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *pf_version(void);

// # Safety
// `k`, `m` and `out` must be valid pointers.
enum PfStatus pf_project_world(const struct PfIntrinsics *k,
                               const struct PfTransform *m,
                               struct PfVec3 point,
                               struct PfPixel *out);

// `out = a · b` (apply `b` first).
//
// # Safety
// All pointers must be valid; `out` may alias an input.
enum PfStatus pf_compose(const struct PfTransform *a,
                         const struct PfTransform *b,
                         struct PfTransform *out);

// # Safety
// All pointers must be valid; `out` may alias `m`.
enum PfStatus pf_invert(const struct PfTransform *m, struct PfTransform *out);

// Rotation angle between the rotation parts of `a` and `b`, in degrees.
//
// # Safety
// All pointers must be valid.
enum PfStatus pf_angular_distance(const struct PfTransform *a,
                                  const struct PfTransform *b,
                                  double *out_deg);

// Mean vertex displacement of `mesh` between poses `a` and `b`, in mm.
//
// # Safety
// All pointers must be valid.
enum PfStatus pf_add_metric(const struct PfMesh *mesh,
                            const struct PfTransform *a,
                            const struct PfTransform *b,
                            double *out_mm);

// Loads an ASCII PLY or OBJ file; the object id is the file stem.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum PfStatus pf_mesh_load(const char *path, struct PfMesh **out);

// Builds a mesh from `n_vertices` xyz triples and `n_triangles` index
// triples.
//
// # Safety
// `vertices` must hold `3 * n_vertices` doubles, `triangles`
// `3 * n_triangles` indices, `id` must be NUL-terminated, `out` valid.
enum PfStatus pf_mesh_from_arrays(const char *id,
                                  const double *vertices,
                                  size_t n_vertices,
                                  const uint32_t *triangles,
                                  size_t n_triangles,
                                  struct PfMesh **out);

// # Safety
// `mesh` must come from this library or be null.
void pf_mesh_free(struct PfMesh *mesh);

// # Safety
// `mesh` must be a valid handle.
size_t pf_mesh_vertex_count(const struct PfMesh *mesh);

// Empty scene over a mid-gray background of the intrinsics' size.
//
// # Safety
// `k` and `out` must be valid pointers.
enum PfStatus pf_scene_new(const struct PfIntrinsics *k, struct PfScene **out);

// # Safety
// `path` must be NUL-terminated and `out` valid.
enum PfStatus pf_scene_load_workspace(const char *path, struct PfScene **out);

// # Safety
// `scene` must be a valid handle and `path` NUL-terminated.
enum PfStatus pf_scene_save_workspace(const struct PfScene *scene, const char *path);

// # Safety
// `scene` must come from this library or be null.
void pf_scene_free(struct PfScene *scene);

// Adds `mesh` at the identity pose under the mesh's id. The scene keeps
// its own reference; the caller still frees `mesh`.
//
// # Safety
// Both handles must be valid.
enum PfStatus pf_scene_add_object(struct PfScene *scene, const struct PfMesh *mesh);

// # Safety
// `scene` must be valid, `id` NUL-terminated, `pose` valid.
enum PfStatus pf_scene_set_pose(struct PfScene *scene,
                                const char *id,
                                const struct PfTransform *pose);

// # Safety
// `scene` must be valid, `id` NUL-terminated, `out` valid.
enum PfStatus pf_scene_get_pose(const struct PfScene *scene,
                                const char *id,
                                struct PfTransform *out);

// Renders the overlay as PNG bytes. `threads` 0 uses the default pool.
//
// # Safety
// `scene` and `out` must be valid.
enum PfStatus pf_scene_render_png(const struct PfScene *scene,
                                  enum PfCamera cam,
                                  uint32_t threads,
                                  struct PfBuffer *out);

// # Safety
// `buf` must come from this library; freeing twice is undefined.
void pf_buffer_free(struct PfBuffer buf);

// Pose as four lines of eight-decimal text; free with [`pf_string_free`].
//
// # Safety
// `m` and `out` must be valid.
enum PfStatus pf_pose_export(const struct PfTransform *m, char **out);

// Parses pose text (whitespace or comma separated), snapping slightly
// drifted rotations back onto SO(3).
//
// # Safety
// `text` must be NUL-terminated and `out` valid.
enum PfStatus pf_pose_import(const char *text, struct PfTransform *out);

// # Safety
// `s` must come from this library or be null.
void pf_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POSEFORGE_H */
