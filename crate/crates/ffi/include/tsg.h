#ifndef TSG_H
#define TSG_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result codes. Values 1 to 3 match the command-line exit codes.
typedef enum TsgStatus {
  TSG_STATUS_OK = 0,
  // File could not be read or written.
  TSG_STATUS_IO = 1,
  // Malformed input, bad parameters, or a dimension mismatch.
  TSG_STATUS_INVALID = 2,
  // The task matched no point.
  TSG_STATUS_EMPTY_RESULT = 3,
  // The graph has no place nodes.
  TSG_STATUS_NOT_FOUND = 4,
  // A required pointer argument was null or a string was not UTF-8.
  TSG_STATUS_BAD_ARGUMENT = 5,
  // A Rust panic was caught at the boundary.
  TSG_STATUS_PANIC = 6,
} TsgStatus;

// Opaque metric-semantic point cloud.
typedef struct TsgCloud TsgCloud;

// Opaque scene graph.
typedef struct TsgSceneGraph TsgSceneGraph;

// Element counts of a scene graph.
typedef struct TsgGraphCounts {
  size_t points;
  size_t objects;
  size_t place_graphs;
  size_t place_nodes;
  size_t place_edges;
  size_t regions;
  size_t attachments;
} TsgGraphCounts;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *tsg_version(void);

// Message of the last failed call on this thread; empty after a success.
// Valid until the next call on the same thread.
const char *tsg_last_error_message(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void tsg_string_free(char *s);

// Cosine similarity of two raw vectors of length `len`.
//
// # Safety
// `a` and `b` must point to `len` readable floats; `out` must be writable.
enum TsgStatus tsg_cosine(const float *a, const float *b, size_t len, double *out);

// Loads an MSPC1 cloud.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum TsgStatus tsg_cloud_load(const char *path, struct TsgCloud **out);

// Writes a cloud as MSPC1.
//
// # Safety
// `cloud` must be a live handle; `path` a NUL-terminated string.
enum TsgStatus tsg_cloud_save(const struct TsgCloud *cloud, const char *path);

// Number of points; 0 for a null handle.
//
// # Safety
// `cloud` must be null or a live handle.
size_t tsg_cloud_len(const struct TsgCloud *cloud);

// Embedding dimension; 0 for a null handle.
//
// # Safety
// `cloud` must be null or a live handle.
size_t tsg_cloud_dim(const struct TsgCloud *cloud);

// Fuses a frame directory into the cloud in place. `matched` (optional) receives
// the number of scan points matched to the map.
//
// # Safety
// `cloud` must be a live handle; `frames_dir` a NUL-terminated string; `matched` null or writable.
enum TsgStatus tsg_cloud_fuse(struct TsgCloud *cloud,
                              const char *frames_dir,
                              double match_radius,
                              size_t interior_erosion,
                              size_t *matched);

// Releases a cloud. Null is ignored.
//
// # Safety
// `cloud` must come from this library and not be freed twice.
void tsg_cloud_free(struct TsgCloud *cloud);

// Builds the scene graph of a cloud for a task file.
//
// # Safety
// `cloud` must be a live handle; `task_path` a NUL-terminated string; `out` writable.
enum TsgStatus tsg_graph_build(const struct TsgCloud *cloud,
                               const char *task_path,
                               struct TsgSceneGraph **out);

// Reads an exported graph.
//
// # Safety
// `path` must be a NUL-terminated string; `out` writable.
enum TsgStatus tsg_graph_import(const char *path, struct TsgSceneGraph **out);

// Writes a graph as JSON; `embed` inlines embeddings.
//
// # Safety
// `graph` must be a live handle; `path` a NUL-terminated string.
enum TsgStatus tsg_graph_export(const struct TsgSceneGraph *graph, const char *path, bool embed);

// Serializes a graph to a new JSON string, released with [`tsg_string_free`].
//
// # Safety
// `graph` must be a live handle; `out` writable.
enum TsgStatus tsg_graph_to_json(const struct TsgSceneGraph *graph, bool embed, char **out);

// Element counts per layer.
//
// # Safety
// `graph` must be a live handle; `out` writable.
enum TsgStatus tsg_graph_counts(const struct TsgSceneGraph *graph, struct TsgGraphCounts *out);

// Nearest place node to a position, compared in the plane. `terrain` receives a
// new string released with [`tsg_string_free`].
//
// # Safety
// `graph` must be a live handle; `position` three readable doubles; outputs writable.
enum TsgStatus tsg_graph_nearest_place(const struct TsgSceneGraph *graph,
                                       const double *position,
                                       char **terrain,
                                       uint32_t *node);

// Releases a graph. Null is ignored.
//
// # Safety
// `graph` must come from this library and not be freed twice.
void tsg_graph_free(struct TsgSceneGraph *graph);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TSG_H */
