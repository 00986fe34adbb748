//! C ABI over f0kit.
//!
//! Every fallible function returns an [`F0kitStatus`]; on failure the message is available
//! from [`f0kit_last_error_message`] on the same thread. Objects are opaque handles that the
//! caller releases with the matching `*_free` function. Output pointers are only written on
//! success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use f0kit::corpus::{load_track, save_track, Track};
use f0kit::metrics::{build_distribution, kld, pearson, reference_range, rmse};
use f0kit::pitch::{extract_f0, F0Track, PitchConfig};
use f0kit::predictor::{load_model, FrameFeatures, PredictorModel};
use f0kit::trajectory::{delta, interpolate, rescale_to_target, LogF0Track, SpeakerStats};
use f0kit::Error;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F0kitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Audio = 4,
    Pitch = 5,
    Trajectory = 6,
    Metrics = 7,
    Predictor = 8,
    Corpus = 9,
    Io = 10,
    Panic = 99,
}

/// Pitch extraction parameters; obtain defaults from [`f0kit_pitch_config_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct F0kitPitchConfig {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub hop_s: f64,
    pub window_s: f64,
    pub voicing_threshold: f64,
}

impl From<F0kitPitchConfig> for PitchConfig {
    fn from(c: F0kitPitchConfig) -> Self {
        PitchConfig {
            fmin_hz: c.fmin_hz,
            fmax_hz: c.fmax_hz,
            hop_s: c.hop_s,
            window_s: c.window_s,
            voicing_threshold: c.voicing_threshold,
        }
    }
}

/// Frame-level F0 in Hz with a voicing mask.
pub struct F0kitF0Track(F0Track);

/// Continuous log-Hz trajectory.
pub struct F0kitLogTrack(LogF0Track);

/// Trained frame-level F0 predictor.
pub struct F0kitModel(PredictorModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(F0kitStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Audio(_) => F0kitStatus::Audio,
            Error::Pitch(_) => F0kitStatus::Pitch,
            Error::Trajectory(_) => F0kitStatus::Trajectory,
            Error::Metrics(_) => F0kitStatus::Metrics,
            Error::Predictor(_) => F0kitStatus::Predictor,
            Error::Corpus(_) => F0kitStatus::Corpus,
            Error::Io { .. } => F0kitStatus::Io,
            _ => F0kitStatus::InvalidArgument,
        };
        Failure(status, format!("{}: {e}", e.kind()))
    }
}

macro_rules! impl_failure_from {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Error::from(e).into()
            }
        }
    )*};
}
impl_failure_from!(
    f0kit::audio::AudioError,
    f0kit::pitch::PitchError,
    f0kit::trajectory::TrajectoryError,
    f0kit::metrics::MetricsError,
    f0kit::predictor::PredictorError,
    f0kit::corpus::CorpusError
);

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(F0kitStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> F0kitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            F0kitStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            F0kitStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(data: *const T, len: usize) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Failure(
            F0kitStatus::NullPointer,
            "null input buffer".into(),
        ));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(F0kitStatus::NullPointer, "null handle".into()))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(
            F0kitStatus::NullPointer,
            "null output pointer".into(),
        ));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_scalar<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(
            F0kitStatus::NullPointer,
            "null output pointer".into(),
        ));
    }
    *out = value;
    Ok(())
}

/// Copies `values` into a caller buffer of `capacity` elements.
unsafe fn copy_out(values: &[f64], out: *mut f64, capacity: usize) -> Result<(), Failure> {
    if capacity < values.len() {
        return Err(Failure(
            F0kitStatus::BufferTooSmall,
            format!("buffer holds {capacity} values, {} needed", values.len()),
        ));
    }
    if values.is_empty() {
        return Ok(());
    }
    if out.is_null() {
        return Err(Failure(
            F0kitStatus::NullPointer,
            "null output buffer".into(),
        ));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), out, values.len());
    Ok(())
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(F0kitStatus::NullPointer, "null path".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))
}

/// Message of the last failure on this thread, or null after a success. The pointer stays
/// valid until the next f0kit call on the same thread.
#[no_mangle]
pub extern "C" fn f0kit_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn f0kit_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn f0kit_pitch_config_default() -> F0kitPitchConfig {
    let d = PitchConfig::default();
    F0kitPitchConfig {
        fmin_hz: d.fmin_hz,
        fmax_hz: d.fmax_hz,
        hop_s: d.hop_s,
        window_s: d.window_s,
        voicing_threshold: d.voicing_threshold,
    }
}

// ---- F0 tracks ----

/// Runs pitch extraction on mono samples in [-1, 1]. `config` may be null for defaults.
///
/// # Safety
/// `samples` must point to `n_samples` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_extract_f0(
    samples: *const f64,
    n_samples: usize,
    sample_rate: u32,
    config: *const F0kitPitchConfig,
    out: *mut *mut F0kitF0Track,
) -> F0kitStatus {
    guard(|| {
        let samples = slice(samples, n_samples)?.to_vec();
        let cfg: PitchConfig = config
            .as_ref()
            .map_or_else(PitchConfig::default, |c| (*c).into());
        let clip = f0kit::audio::AudioClip::new(samples, sample_rate)?;
        let track = extract_f0(&clip, &cfg)?;
        put(out, F0kitF0Track(track))
    })
}

/// Builds a track from Hz values and a voicing mask (nonzero = voiced).
///
/// # Safety
/// `values_hz` and `voiced` must each point to `n` readable elements.
#[no_mangle]
pub unsafe extern "C" fn f0kit_f0_track_new(
    hop_s: f64,
    values_hz: *const f64,
    voiced: *const u8,
    n: usize,
    out: *mut *mut F0kitF0Track,
) -> F0kitStatus {
    guard(|| {
        let values = slice(values_hz, n)?.to_vec();
        let mask = slice(voiced, n)?.iter().map(|&v| v != 0).collect();
        put(out, F0kitF0Track(F0Track::new(hop_s, values, mask)?))
    })
}

/// Number of frames, or 0 for a null handle.
///
/// # Safety
/// `track` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn f0kit_f0_track_len(track: *const F0kitF0Track) -> usize {
    track.as_ref().map_or(0, |t| t.0.len())
}

/// Copies Hz values (0 on unvoiced frames) and, if `voiced` is non-null, the mask.
///
/// # Safety
/// Output buffers must hold `capacity` elements.
#[no_mangle]
pub unsafe extern "C" fn f0kit_f0_track_values(
    track: *const F0kitF0Track,
    values_hz: *mut f64,
    voiced: *mut u8,
    capacity: usize,
) -> F0kitStatus {
    guard(|| {
        let t = &handle(track)?.0;
        copy_out(t.values_hz(), values_hz, capacity)?;
        if !voiced.is_null() {
            for (i, &v) in t.voiced().iter().enumerate() {
                *voiced.add(i) = v as u8;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `track` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn f0kit_f0_track_free(track: *mut F0kitF0Track) {
    if !track.is_null() {
        drop(Box::from_raw(track));
    }
}

// ---- log-F0 tracks ----

/// Builds a fully voiced log-Hz track.
///
/// # Safety
/// `values_log` must point to `n` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn f0kit_log_track_new(
    hop_s: f64,
    values_log: *const f64,
    n: usize,
    out: *mut *mut F0kitLogTrack,
) -> F0kitStatus {
    guard(|| {
        let values = slice(values_log, n)?.to_vec();
        put(out, F0kitLogTrack(LogF0Track::from_values(hop_s, values)?))
    })
}

/// # Safety
/// `track` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn f0kit_log_track_len(track: *const F0kitLogTrack) -> usize {
    track.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// `values_log` must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn f0kit_log_track_values(
    track: *const F0kitLogTrack,
    values_log: *mut f64,
    capacity: usize,
) -> F0kitStatus {
    guard(|| copy_out(handle(track)?.0.values_log(), values_log, capacity))
}

/// # Safety
/// `track` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn f0kit_log_track_free(track: *mut F0kitLogTrack) {
    if !track.is_null() {
        drop(Box::from_raw(track));
    }
}

/// Log-domain interpolation over unvoiced frames.
///
/// # Safety
/// `track` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_interpolate(
    track: *const F0kitF0Track,
    out: *mut *mut F0kitLogTrack,
) -> F0kitStatus {
    guard(|| put(out, F0kitLogTrack(interpolate(&handle(track)?.0)?)))
}

/// Forward difference of log values; writes `len - 1` values and their count.
///
/// # Safety
/// `out` must hold `capacity` doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_delta(
    track: *const F0kitLogTrack,
    out: *mut f64,
    capacity: usize,
    written: *mut usize,
) -> F0kitStatus {
    guard(|| {
        let d = delta(&handle(track)?.0)?;
        copy_out(&d.values, out, capacity)?;
        put_scalar(written, d.values.len())
    })
}

/// Shifts a track from a source speaker mean to a target speaker mean (both in Hz).
///
/// # Safety
/// `track` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_rescale(
    track: *const F0kitLogTrack,
    source_mean_hz: f64,
    target_mean_hz: f64,
    out: *mut *mut F0kitLogTrack,
) -> F0kitStatus {
    guard(|| {
        let stats = |mean_hz: f64| -> Result<SpeakerStats, Failure> {
            if !(mean_hz.is_finite() && mean_hz > 0.0) {
                return Err(invalid(format!(
                    "speaker mean must be positive, got {mean_hz}"
                )));
            }
            Ok(SpeakerStats {
                mean_hz,
                variance_hz2: 0.0,
                n_frames: 0,
            })
        };
        let t = rescale_to_target(
            &handle(track)?.0,
            &stats(source_mean_hz)?,
            &stats(target_mean_hz)?,
        )?;
        put(out, F0kitLogTrack(t))
    })
}

// ---- metrics ----

/// RMSE in Hz and in log-Hz between equal-length tracks.
///
/// # Safety
/// Handles must be live; output pointers writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_rmse(
    a: *const F0kitLogTrack,
    b: *const F0kitLogTrack,
    out_hz: *mut f64,
    out_log: *mut f64,
) -> F0kitStatus {
    guard(|| {
        let r = rmse(&handle(a)?.0, &handle(b)?.0)?;
        put_scalar(out_hz, r.hz)?;
        put_scalar(out_log, r.log)
    })
}

/// Pearson correlation of log values; 0 when either track is constant.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_pearson(
    a: *const F0kitLogTrack,
    b: *const F0kitLogTrack,
    out: *mut f64,
) -> F0kitStatus {
    guard(|| put_scalar(out, pearson(&handle(a)?.0, &handle(b)?.0)?))
}

/// D(target || system) in nats between histograms of two value samples. Bin edges span
/// the target sample's range.
///
/// # Safety
/// `target` and `system` must point to `n_target` and `n_system` doubles.
#[no_mangle]
pub unsafe extern "C" fn f0kit_kld(
    target: *const f64,
    n_target: usize,
    system: *const f64,
    n_system: usize,
    bins: usize,
    epsilon: f64,
    out: *mut f64,
) -> F0kitStatus {
    guard(|| {
        let t = slice(target, n_target)?;
        let s = slice(system, n_system)?;
        let range = reference_range(t)?;
        let p = build_distribution(t, bins, range, epsilon)?;
        let q = build_distribution(s, bins, range, epsilon)?;
        put_scalar(out, kld(&p, &q)?)
    })
}

// ---- persistence ----

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn f0kit_f0_track_save(
    track: *const F0kitF0Track,
    path: *const c_char,
) -> F0kitStatus {
    guard(|| {
        Ok(save_track(
            self::path(path)?,
            &Track::F0(handle(track)?.0.clone()),
        )?)
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn f0kit_log_track_save(
    track: *const F0kitLogTrack,
    path: *const c_char,
) -> F0kitStatus {
    guard(|| {
        Ok(save_track(
            self::path(path)?,
            &Track::Log(handle(track)?.0.clone()),
        )?)
    })
}

/// Loads an F0 track file; a log-track file is rejected.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_f0_track_load(
    path: *const c_char,
    out: *mut *mut F0kitF0Track,
) -> F0kitStatus {
    guard(|| match load_track(self::path(path)?)? {
        Track::F0(t) => put(out, F0kitF0Track(t)),
        Track::Log(_) => Err(invalid("file holds a log-F0 track")),
    })
}

/// Loads a track file as log-F0; F0 tracks are interpolated on load.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_log_track_load(
    path: *const c_char,
    out: *mut *mut F0kitLogTrack,
) -> F0kitStatus {
    guard(|| {
        let t = match load_track(self::path(path)?)? {
            Track::F0(t) => interpolate(&t)?,
            Track::Log(t) => t,
        };
        put(out, F0kitLogTrack(t))
    })
}

// ---- predictor ----

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_model_load(
    path: *const c_char,
    out: *mut *mut F0kitModel,
) -> F0kitStatus {
    guard(|| put(out, F0kitModel(load_model(self::path(path)?)?)))
}

/// Per-frame feature width the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn f0kit_model_input_dim(model: *const F0kitModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.shape().input_dim)
}

/// Predicts a log-F0 track from row-major features of `n_frames x dim` values. The layout is
/// phoneme one-hot, position in phone, speaker one-hot; `n_speakers` splits the row.
///
/// # Safety
/// `features` must point to `n_frames * dim` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn f0kit_model_predict(
    model: *const F0kitModel,
    features: *const f64,
    n_frames: usize,
    dim: usize,
    n_speakers: usize,
    hop_s: f64,
    out: *mut *mut F0kitLogTrack,
) -> F0kitStatus {
    guard(|| {
        let m = &handle(model)?.0;
        let len = n_frames
            .checked_mul(dim)
            .ok_or_else(|| invalid("feature buffer size overflows"))?;
        let data = slice(features, len)?.to_vec();
        let f = FrameFeatures::from_raw(data, dim, n_speakers)?;
        put(out, F0kitLogTrack(m.predict(&f, hop_s)?))
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn f0kit_model_free(model: *mut F0kitModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
