#ifndef HYFACIAL_H
#define HYFACIAL_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum HyfStatus {
  HYF_STATUS_OK = 0,
  HYF_STATUS_NULL_POINTER = 1,
  HYF_STATUS_INVALID_UTF8 = 2,
  HYF_STATUS_INVALID_ARGUMENT = 3,
  // The request itself was rejected (bad config, missing deep features, ...).
  HYF_STATUS_VALIDATION = 4,
  // A pipeline stage or file operation failed.
  HYF_STATUS_FAILED = 5,
  // Internal panic caught at the boundary.
  HYF_STATUS_PANIC = 6,
  HYF_STATUS_OUT_OF_RANGE = 7,
} HyfStatus;

typedef struct HyfDeepFeatures HyfDeepFeatures;

typedef struct HyfDescriptors HyfDescriptors;

typedef struct HyfImage HyfImage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// Valid until the next call into the library on this thread.
const char *hyf_last_error_message(void);

// Library version as a static string.
const char *hyf_version(void);

// # Safety
// `s` must come from this library, or be null.
void hyf_string_free(char *s);

// Copies `height * width` row-major intensities in [0, 1] into a new image.
//
// # Safety
// `pixels` must point to `height * width` doubles; `out` must be writable.
enum HyfStatus hyf_image_new(size_t height,
                             size_t width,
                             const double *pixels,
                             struct HyfImage **out);

// # Safety
// `img` must come from `hyf_image_new`, or be null.
void hyf_image_free(struct HyfImage *img);

// SIFT keypoints and 128-value descriptors with default parameters.
//
// # Safety
// `img` must be a live image handle; `out` must be writable.
enum HyfStatus hyf_sift_describe(const struct HyfImage *img, struct HyfDescriptors **out);

// FAST keypoints and 256-bit ORB descriptors with default parameters.
//
// # Safety
// `img` must be a live image handle; `out` must be writable.
enum HyfStatus hyf_orb_describe(const struct HyfImage *img, struct HyfDescriptors **out);

// Number of keypoints, or 0 for a null handle.
//
// # Safety
// `ds` must be a live descriptor handle or null.
size_t hyf_descriptors_len(const struct HyfDescriptors *ds);

// Values per descriptor row: 128 for SIFT, 256 bits for ORB.
//
// # Safety
// `ds` must be a live descriptor handle or null.
size_t hyf_descriptors_dim(const struct HyfDescriptors *ds);

// Keypoint `i` as (x, y, scale, orientation in radians).
//
// # Safety
// `ds` must be a live descriptor handle; `out` must point to 4 doubles.
enum HyfStatus hyf_descriptors_keypoint(const struct HyfDescriptors *ds, size_t i, double *out);

// Row `i` as doubles; ORB bits are unpacked to 0/1. `len` must equal the row dimension.
//
// # Safety
// `ds` must be a live descriptor handle; `out` must point to `len` doubles.
enum HyfStatus hyf_descriptors_row(const struct HyfDescriptors *ds,
                                   size_t i,
                                   double *out,
                                   size_t len);

// # Safety
// `ds` must come from a describe call, or be null.
void hyf_descriptors_free(struct HyfDescriptors *ds);

// Reads an HYF1 deep-feature file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum HyfStatus hyf_deep_features_load(const char *path, struct HyfDeepFeatures **out);

// # Safety
// `t` must be a live table handle or null.
size_t hyf_deep_features_len(const struct HyfDeepFeatures *t);

// # Safety
// `t` must be a live table handle or null.
size_t hyf_deep_features_dim(const struct HyfDeepFeatures *t);

// Copies row `i` into `out`, which holds `len` doubles (must equal the dimension).
//
// # Safety
// `t` must be a live table handle; `out` must point to `len` doubles.
enum HyfStatus hyf_deep_features_row(const struct HyfDeepFeatures *t,
                                     size_t i,
                                     double *out,
                                     size_t len);

// Identifier of row `i` as a new string (free with `hyf_string_free`).
//
// # Safety
// `t` must be a live table handle; `out` must be writable.
enum HyfStatus hyf_deep_features_id(const struct HyfDeepFeatures *t, size_t i, char **out);

// # Safety
// `t` must come from `hyf_deep_features_load`, or be null.
void hyf_deep_features_free(struct HyfDeepFeatures *t);

// Runs the pipeline for a JSON run config and returns the report JSON.
//
// Relative paths in the config resolve against `base_dir` (the working
// directory when null). Artifacts are written to the config's output
// directory exactly as the command-line tool does.
//
// # Safety
// `config_json` and `base_dir` must be NUL-terminated strings (`base_dir`
// may be null); `out_report` must be writable.
enum HyfStatus hyf_pipeline_run_json(const char *config_json,
                                     const char *base_dir,
                                     char **out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYFACIAL_H */
