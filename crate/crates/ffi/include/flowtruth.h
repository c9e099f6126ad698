/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef FLOWTRUTH_H
#define FLOWTRUTH_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FtStatus {
  FT_STATUS_OK = 0,
  FT_STATUS_NULL_POINTER = 1,
  FT_STATUS_INVALID_ARGUMENT = 2,
  FT_STATUS_DIMENSION_MISMATCH = 3,
  FT_STATUS_PARSE = 4,
  FT_STATUS_IO = 5,
  FT_STATUS_NON_FINITE = 6,
  // A bug: the library panicked. The handle arguments are still valid.
  FT_STATUS_PANIC = 7,
} FtStatus;

// Dense flow field; `u` points right, `v` down.
typedef struct FtFlow FtFlow;

// Planar float image, `channels x height x width`.
typedef struct FtImage FtImage;

// Optional estimator overrides. Zero fields take the defaults.
typedef struct FtMatchParams {
  size_t patch;
  size_t levels;
  size_t radius;
} FtMatchParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *ft_last_error(void);

// Library version as a static nul-terminated string.
const char *ft_version(void);

// Copies `channels * height * width` planar floats into a new image.
enum FtStatus ft_image_new(size_t channels,
                           size_t height,
                           size_t width,
                           const float *data,
                           struct FtImage **out_image);

enum FtStatus ft_image_dims(const struct FtImage *image,
                            size_t *channels,
                            size_t *height,
                            size_t *width);

// Borrowed planar pixel data, valid until the image is freed.
const float *ft_image_data(const struct FtImage *image);

void ft_image_free(struct FtImage *image);

enum FtStatus ft_flow_new(size_t height,
                          size_t width,
                          const float *u,
                          const float *v,
                          struct FtFlow **out_flow);

enum FtStatus ft_flow_dims(const struct FtFlow *flow, size_t *height, size_t *width);

// Borrowed horizontal components, row-major, valid until the flow is freed.
const float *ft_flow_u(const struct FtFlow *flow);

// Borrowed vertical components, row-major, valid until the flow is freed.
const float *ft_flow_v(const struct FtFlow *flow);

void ft_flow_free(struct FtFlow *flow);

// Reads a Middlebury `.flo` file.
enum FtStatus ft_flo_read(const char *file, struct FtFlow **out_flow);

// Writes a Middlebury `.flo` file atomically.
enum FtStatus ft_flo_write(const struct FtFlow *flow, const char *file);

// Bilinear backward warp with border clamping. `out_coverage`, if not
// null, receives a one-channel 0/1 image of in-frame samples.
enum FtStatus ft_backward_warp(const struct FtImage *image,
                               const struct FtFlow *flow,
                               struct FtImage **out_image,
                               struct FtImage **out_coverage);

// Forward splat to the rounded target. `out_holes`, if not null, receives
// a one-channel 0/1 image of pixels nothing landed on.
enum FtStatus ft_forward_scatter(const struct FtImage *image,
                                 const struct FtFlow *flow,
                                 struct FtImage **out_image,
                                 struct FtImage **out_holes);

// Flow metrics as a JSON report. `mask` is `height * width` bytes (nonzero
// means evaluated) or null for every pixel. Free the string with
// `ft_string_free`.
enum FtStatus ft_flow_metrics_json(const struct FtFlow *pred,
                                   const struct FtFlow *gt,
                                   const uint8_t *mask,
                                   char **out_json);

void ft_string_free(char *s);

// Adds the template for `seed`. `amplitude <= 0` selects the default.
// Gray inputs are promoted to RGB.
enum FtStatus ft_embed(const struct FtImage *image,
                       uint64_t seed,
                       double amplitude,
                       struct FtImage **out_image);

// Normalized cross-correlation between the decoded residual of `image`
// and the reference for `seed`.
enum FtStatus ft_decode_ncc(const struct FtImage *image, uint64_t seed, double *out_ncc);

// Estimates the motion of the template for `seed` in `frame`. `params`
// may be null. `out_confidence`, if not null, receives a one-channel
// confidence image in `[0, 1]`.
enum FtStatus ft_estimate(const struct FtImage *frame,
                          uint64_t seed,
                          const struct FtMatchParams *params,
                          struct FtFlow **out_flow,
                          struct FtImage **out_confidence);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLOWTRUTH_H */
