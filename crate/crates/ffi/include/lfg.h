#ifndef LFG_H
#define LFG_H

/* Generated by cbindgen at build time. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define LFG_RULE_MAJORITY 0

#define LFG_RULE_K_MIN 1

#define LFG_DTYPE_F32 1

#define LFG_DTYPE_U8 2

#define LFG_DTYPE_I32 3

/**
 * Status codes returned by every fallible function.
 */
typedef enum LfgStatus {
  LFG_STATUS_OK = 0,
  LFG_STATUS_NULL_POINTER = 1,
  /**
   * Malformed or inconsistent input.
   */
  LFG_STATUS_INVALID_INPUT = 2,
  /**
   * Well-formed input on which the computation cannot proceed.
   */
  LFG_STATUS_COMPUTATION = 3,
  LFG_STATUS_IO = 4,
  LFG_STATUS_BAD_MAGIC = 5,
  LFG_STATUS_UNSUPPORTED_VERSION = 6,
  LFG_STATUS_UNKNOWN_DTYPE = 7,
  LFG_STATUS_TRUNCATED = 8,
  LFG_STATUS_DTYPE_MISMATCH = 9,
  LFG_STATUS_PANIC = 10,
} LfgStatus;

/**
 * Opaque anchor-set handle.
 */
typedef struct LfgAnchorSet LfgAnchorSet;

/**
 * Opaque tensor handle.
 */
typedef struct LfgTensor LfgTensor;

typedef struct LfgTrajScores {
  double ate_m;
  double rot_deg;
  double trans_m;
} LfgTrajScores;

typedef struct LfgDepthResult {
  double scale;
  double shift;
  double absrel;
  double rmse_m;
} LfgDepthResult;

typedef struct LfgSegScores {
  double pa;
  double miou;
  double mdice;
  double fwiou;
} LfgSegScores;

typedef struct LfgPdms {
  double nc;
  double dac;
  double ep;
  double ttc;
  double comfort;
  double pdms;
} LfgPdms;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *lfg_version(void);

/**
 * Message of the last failure on this thread, or null. Valid until the next
 * failing call on the same thread.
 */
const char *lfg_last_error_message(void);

/**
 * Geodesic angle (radians) between two row-major 3x3 rotations.
 *
 * # Safety
 * `r1` and `r2` must point to 9 doubles; `out` to one writable double.
 */
enum LfgStatus lfg_geodesic_distance(const double *r1, const double *r2, double *out);

/**
 * Least-squares similarity (`with_scale`) or rigid transform mapping the
 * `n` points of `pred` (n x 3) onto `gt`.
 *
 * # Safety
 * `pred`, `gt` must hold `3 n` doubles; `out_rotation` 9, `out_translation`
 * 3 and `out_scale` 1 writable doubles.
 */
enum LfgStatus lfg_umeyama(const double *pred,
                           const double *gt,
                           size_t n,
                           bool with_scale,
                           double *out_scale,
                           double *out_rotation,
                           double *out_translation);

/**
 * Trajectory errors between `n` predicted and ground-truth poses, each a
 * row-major 4x4 camera-to-world matrix.
 *
 * # Safety
 * `pred` and `gt` must hold `16 n` doubles; `out` must be writable.
 */
enum LfgStatus lfg_trajectory_scores(const double *pred,
                                     const double *gt,
                                     size_t n,
                                     bool with_scale,
                                     struct LfgTrajScores *out);

/**
 * Scale-shift aligns `pred` to `gt` (both `h x w`; non-finite or
 * non-positive entries are invalid) and scores the aligned map.
 *
 * # Safety
 * `pred` and `gt` must hold `h w` doubles; `out` must be writable.
 */
enum LfgStatus lfg_depth_metrics(const double *pred,
                                 const double *gt,
                                 size_t height,
                                 size_t width,
                                 struct LfgDepthResult *out);

/**
 * Segmentation scores of two `h x w` label maps (classes 0..6).
 *
 * # Safety
 * `pred` and `gt` must hold `h w` bytes; `out` must be writable.
 */
enum LfgStatus lfg_seg_scores(const uint8_t *pred,
                              const uint8_t *gt,
                              size_t height,
                              size_t width,
                              struct LfgSegScores *out);

/**
 * Dynamic/static decision for a displacement series.
 *
 * `rule` is `LFG_RULE_MAJORITY` or `LFG_RULE_K_MIN`; `k_min` is used by the
 * latter only.
 *
 * # Safety
 * `displacements` must hold `n` doubles; `out` must be writable.
 */
enum LfgStatus lfg_classify_dynamic(const double *displacements,
                                    size_t n,
                                    double tau,
                                    uint32_t rule,
                                    size_t k_min,
                                    bool *out);

/**
 * Scores a plan against a scene given as JSON:
 * `{"plan": {...}, "scene": {...}, "config": {...}}` (config optional).
 *
 * # Safety
 * `request_json` must be a NUL-terminated string; `out` must be writable.
 */
enum LfgStatus lfg_pdms_score(const char *request_json, struct LfgPdms *out);

/**
 * Reads an LFGT file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LfgStatus lfg_tensor_read(const char *path, struct LfgTensor **out);

/**
 * Builds a tensor by copying `len` elements of dtype `dtype` from `data`.
 *
 * # Safety
 * `shape` must hold `ndim` values; `data` must hold `len` elements of the
 * given dtype; `out` must be writable.
 */
enum LfgStatus lfg_tensor_new(uint32_t dtype,
                              const uint64_t *shape,
                              size_t ndim,
                              const void *data,
                              size_t len,
                              struct LfgTensor **out);

/**
 * Writes a tensor atomically.
 *
 * # Safety
 * `t` must be a live handle; `path` a NUL-terminated string.
 */
enum LfgStatus lfg_tensor_write(const struct LfgTensor *t, const char *path);

/**
 * Releases a tensor; null is ignored.
 *
 * # Safety
 * `t` must be null or a handle not yet freed.
 */
void lfg_tensor_free(struct LfgTensor *t);

/**
 * `LFG_DTYPE_*` code, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
uint32_t lfg_tensor_dtype(const struct LfgTensor *t);

/**
 * Number of dimensions, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t lfg_tensor_ndim(const struct LfgTensor *t);

/**
 * Copies the shape into `out` (capacity `cap`, at least ndim).
 *
 * # Safety
 * `t` must be a live handle; `out` must hold `cap` writable values.
 */
enum LfgStatus lfg_tensor_shape(const struct LfgTensor *t, uint64_t *out, size_t cap);

/**
 * Number of elements, or 0 for a null handle.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
size_t lfg_tensor_len(const struct LfgTensor *t);

/**
 * Borrowed pointer to the element data; valid while the handle lives.
 *
 * # Safety
 * `t` must be null or a live handle.
 */
const void *lfg_tensor_data(const struct LfgTensor *t);

/**
 * K-means anchors from `n` trajectories of 8 (x, y) waypoints each, flattened
 * to 16 doubles per trajectory.
 *
 * # Safety
 * `futures` must hold `16 n` doubles; `out` must be writable.
 */
enum LfgStatus lfg_anchors_kmeans(const double *futures,
                                  size_t n,
                                  size_t k,
                                  uint64_t seed,
                                  struct LfgAnchorSet **out);

/**
 * Number of anchors, or 0 for a null handle.
 *
 * # Safety
 * `a` must be null or a live handle.
 */
size_t lfg_anchors_len(const struct LfgAnchorSet *a);

/**
 * Copies anchor `index` (16 doubles) into `out`.
 *
 * # Safety
 * `a` must be a live handle; `out` must hold 16 writable doubles.
 */
enum LfgStatus lfg_anchors_get(const struct LfgAnchorSet *a, size_t index, double *out);

/**
 * Decodes the plan: argmax of `confidences` (length k) plus that mode's
 * offsets (`16 k` doubles). Writes 16 doubles to `out_plan` and the mode.
 *
 * # Safety
 * Pointers must hold the stated number of elements.
 */
enum LfgStatus lfg_anchors_decode(const struct LfgAnchorSet *a,
                                  const double *confidences,
                                  const double *offsets,
                                  size_t k,
                                  double *out_plan,
                                  size_t *out_mode);

/**
 * Releases an anchor set; null is ignored.
 *
 * # Safety
 * `a` must be null or a handle not yet freed.
 */
void lfg_anchors_free(struct LfgAnchorSet *a);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LFG_H */
