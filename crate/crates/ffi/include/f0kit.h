#ifndef F0KIT_H
#define F0KIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible function.
typedef enum F0kitStatus {
  F0KIT_STATUS_OK = 0,
  F0KIT_STATUS_NULL_POINTER = 1,
  F0KIT_STATUS_INVALID_ARGUMENT = 2,
  F0KIT_STATUS_BUFFER_TOO_SMALL = 3,
  F0KIT_STATUS_AUDIO = 4,
  F0KIT_STATUS_PITCH = 5,
  F0KIT_STATUS_TRAJECTORY = 6,
  F0KIT_STATUS_METRICS = 7,
  F0KIT_STATUS_PREDICTOR = 8,
  F0KIT_STATUS_CORPUS = 9,
  F0KIT_STATUS_IO = 10,
  F0KIT_STATUS_PANIC = 99,
} F0kitStatus;

// Frame-level F0 in Hz with a voicing mask.
typedef struct F0kitF0Track F0kitF0Track;

// Continuous log-Hz trajectory.
typedef struct F0kitLogTrack F0kitLogTrack;

// Trained frame-level F0 predictor.
typedef struct F0kitModel F0kitModel;

// Pitch extraction parameters; obtain defaults from [`f0kit_pitch_config_default`].
typedef struct F0kitPitchConfig {
  double fmin_hz;
  double fmax_hz;
  double hop_s;
  double window_s;
  double voicing_threshold;
} F0kitPitchConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null after a success. The pointer stays
// valid until the next f0kit call on the same thread.
const char *f0kit_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *f0kit_version(void);

struct F0kitPitchConfig f0kit_pitch_config_default(void);

// Runs pitch extraction on mono samples in [-1, 1]. `config` may be null for defaults.
//
// # Safety
// `samples` must point to `n_samples` readable doubles; `out` must be writable.
enum F0kitStatus f0kit_extract_f0(const double *samples,
                                  size_t n_samples,
                                  uint32_t sample_rate,
                                  const struct F0kitPitchConfig *config,
                                  struct F0kitF0Track **out);

// Builds a track from Hz values and a voicing mask (nonzero = voiced).
//
// # Safety
// `values_hz` and `voiced` must each point to `n` readable elements.
enum F0kitStatus f0kit_f0_track_new(double hop_s,
                                    const double *values_hz,
                                    const uint8_t *voiced,
                                    size_t n,
                                    struct F0kitF0Track **out);

// Number of frames, or 0 for a null handle.
//
// # Safety
// `track` must be null or a live handle.
size_t f0kit_f0_track_len(const struct F0kitF0Track *track);

// Copies Hz values (0 on unvoiced frames) and, if `voiced` is non-null, the mask.
//
// # Safety
// Output buffers must hold `capacity` elements.
enum F0kitStatus f0kit_f0_track_values(const struct F0kitF0Track *track,
                                       double *values_hz,
                                       uint8_t *voiced,
                                       size_t capacity);

// # Safety
// `track` must be null or a handle not yet freed.
void f0kit_f0_track_free(struct F0kitF0Track *track);

// Builds a fully voiced log-Hz track.
//
// # Safety
// `values_log` must point to `n` readable doubles.
enum F0kitStatus f0kit_log_track_new(double hop_s,
                                     const double *values_log,
                                     size_t n,
                                     struct F0kitLogTrack **out);

// # Safety
// `track` must be null or a live handle.
size_t f0kit_log_track_len(const struct F0kitLogTrack *track);

// # Safety
// `values_log` must hold `capacity` doubles.
enum F0kitStatus f0kit_log_track_values(const struct F0kitLogTrack *track,
                                        double *values_log,
                                        size_t capacity);

// # Safety
// `track` must be null or a handle not yet freed.
void f0kit_log_track_free(struct F0kitLogTrack *track);

// Log-domain interpolation over unvoiced frames.
//
// # Safety
// `track` must be a live handle; `out` must be writable.
enum F0kitStatus f0kit_interpolate(const struct F0kitF0Track *track, struct F0kitLogTrack **out);

// Forward difference of log values; writes `len - 1` values and their count.
//
// # Safety
// `out` must hold `capacity` doubles; `written` must be writable.
enum F0kitStatus f0kit_delta(const struct F0kitLogTrack *track,
                             double *out,
                             size_t capacity,
                             size_t *written);

// Shifts a track from a source speaker mean to a target speaker mean (both in Hz).
//
// # Safety
// `track` must be a live handle; `out` must be writable.
enum F0kitStatus f0kit_rescale(const struct F0kitLogTrack *track,
                               double source_mean_hz,
                               double target_mean_hz,
                               struct F0kitLogTrack **out);

// RMSE in Hz and in log-Hz between equal-length tracks.
//
// # Safety
// Handles must be live; output pointers writable.
enum F0kitStatus f0kit_rmse(const struct F0kitLogTrack *a,
                            const struct F0kitLogTrack *b,
                            double *out_hz,
                            double *out_log);

// Pearson correlation of log values; 0 when either track is constant.
//
// # Safety
// Handles must be live; `out` writable.
enum F0kitStatus f0kit_pearson(const struct F0kitLogTrack *a,
                               const struct F0kitLogTrack *b,
                               double *out);

// D(target || system) in nats between histograms of two value samples. Bin edges span
// the target sample's range.
//
// # Safety
// `target` and `system` must point to `n_target` and `n_system` doubles.
enum F0kitStatus f0kit_kld(const double *target,
                           size_t n_target,
                           const double *system,
                           size_t n_system,
                           size_t bins,
                           double epsilon,
                           double *out);

// # Safety
// `path` must be a NUL-terminated UTF-8 string.
enum F0kitStatus f0kit_f0_track_save(const struct F0kitF0Track *track, const char *path);

// # Safety
// `path` must be a NUL-terminated UTF-8 string.
enum F0kitStatus f0kit_log_track_save(const struct F0kitLogTrack *track, const char *path);

// Loads an F0 track file; a log-track file is rejected.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` writable.
enum F0kitStatus f0kit_f0_track_load(const char *path, struct F0kitF0Track **out);

// Loads a track file as log-F0; F0 tracks are interpolated on load.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` writable.
enum F0kitStatus f0kit_log_track_load(const char *path, struct F0kitLogTrack **out);

// # Safety
// `path` must be a NUL-terminated UTF-8 string; `out` writable.
enum F0kitStatus f0kit_model_load(const char *path, struct F0kitModel **out);

// Per-frame feature width the model expects, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t f0kit_model_input_dim(const struct F0kitModel *model);

// Predicts a log-F0 track from row-major features of `n_frames x dim` values. The layout is
// phoneme one-hot, position in phone, speaker one-hot; `n_speakers` splits the row.
//
// # Safety
// `features` must point to `n_frames * dim` doubles; `out` writable.
enum F0kitStatus f0kit_model_predict(const struct F0kitModel *model,
                                     const double *features,
                                     size_t n_frames,
                                     size_t dim,
                                     size_t n_speakers,
                                     double hop_s,
                                     struct F0kitLogTrack **out);

// # Safety
// `model` must be null or a handle not yet freed.
void f0kit_model_free(struct F0kitModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* F0KIT_H */
