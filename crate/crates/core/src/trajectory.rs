//! Gap-free log-F0 trajectories: unvoiced interpolation, deltas, speaker statistics,
//! mean rescaling and synthetic injection curves.
//!
//! All logarithms are natural logs of Hz.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pitch::F0Track;

/// Sanity bounds on log-F0 values: ln(20 Hz) and ln(2000 Hz).
pub const MIN_LOG_F0: f64 = 2.995_732_273_553_991;
pub const MAX_LOG_F0: f64 = 7.600_902_459_542_082;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("track has no voiced frames")]
    AllUnvoiced,
    #[error("track has {0} frames, need at least 2")]
    TooShort(usize),
    #[error("value {value} at frame {frame} outside sanity bounds [ln 20, ln 2000]")]
    OutOfSanityBounds { frame: usize, value: f64 },
    #[error("invalid trajectory: {0}")]
    Invalid(String),
}

/// Continuous log-Hz trajectory. `voiced_mask` keeps the source voicing flags.
#[derive(Debug, Clone, PartialEq)]
pub struct LogF0Track {
    hop_s: f64,
    values_log: Vec<f64>,
    voiced_mask: Vec<bool>,
}

impl LogF0Track {
    pub fn new(
        hop_s: f64,
        values_log: Vec<f64>,
        voiced_mask: Vec<bool>,
    ) -> Result<Self, TrajectoryError> {
        if !(hop_s > 0.0 && hop_s.is_finite()) {
            return Err(TrajectoryError::Invalid(format!(
                "hop {hop_s} must be positive"
            )));
        }
        if values_log.len() != voiced_mask.len() {
            return Err(TrajectoryError::Invalid(format!(
                "{} values but {} mask entries",
                values_log.len(),
                voiced_mask.len()
            )));
        }
        check_bounds(&values_log)?;
        Ok(Self {
            hop_s,
            values_log,
            voiced_mask,
        })
    }

    /// Fully voiced trajectory.
    pub fn from_values(hop_s: f64, values_log: Vec<f64>) -> Result<Self, TrajectoryError> {
        let mask = vec![true; values_log.len()];
        Self::new(hop_s, values_log, mask)
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    pub fn values_log(&self) -> &[f64] {
        &self.values_log
    }

    pub fn voiced_mask(&self) -> &[bool] {
        &self.voiced_mask
    }

    pub fn len(&self) -> usize {
        self.values_log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_log.is_empty()
    }

    pub fn to_hz(&self) -> Vec<f64> {
        self.values_log.iter().map(|v| v.exp()).collect()
    }

    /// Adds `offset` log-Hz to every frame.
    pub fn shifted(&self, offset: f64) -> Result<Self, TrajectoryError> {
        let values = self.values_log.iter().map(|v| v + offset).collect();
        Self::new(self.hop_s, values, self.voiced_mask.clone())
    }
}

fn check_bounds(values: &[f64]) -> Result<(), TrajectoryError> {
    match values
        .iter()
        .position(|v| !(v.is_finite() && (MIN_LOG_F0..=MAX_LOG_F0).contains(v)))
    {
        Some(frame) => Err(TrajectoryError::OutOfSanityBounds {
            frame,
            value: values[frame],
        }),
        None => Ok(()),
    }
}

/// Frame-to-frame first differences of a log-F0 trajectory (length N - 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaTrack {
    pub hop_s: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeakerStats {
    pub mean_hz: f64,
    pub variance_hz2: f64,
    pub n_frames: usize,
}

/// Fills unvoiced frames so the trajectory has no gaps.
///
/// Interior unvoiced runs are linearly interpolated in the log domain between the
/// flanking voiced frames; leading and trailing runs repeat the nearest voiced value.
pub fn interpolate(track: &F0Track) -> Result<LogF0Track, TrajectoryError> {
    let voiced = track.voiced();
    let hz = track.values_hz();
    let mut anchors = voiced
        .iter()
        .enumerate()
        .filter(|(_, &v)| v)
        .map(|(i, _)| i);
    let first = anchors.next().ok_or(TrajectoryError::AllUnvoiced)?;

    let mut out = vec![0.0; track.len()];
    let first_log = hz[first].ln();
    out[..=first].fill(first_log);

    let mut prev = first;
    let mut prev_log = first_log;
    for next in anchors {
        let next_log = hz[next].ln();
        let span = (next - prev) as f64;
        for (k, slot) in out[prev + 1..next].iter_mut().enumerate() {
            let frac = (k + 1) as f64 / span;
            *slot = prev_log + frac * (next_log - prev_log);
        }
        out[next] = next_log;
        prev = next;
        prev_log = next_log;
    }
    out[prev..].fill(prev_log);

    LogF0Track::new(track.hop_s(), out, voiced.to_vec())
}

pub fn delta(track: &LogF0Track) -> Result<DeltaTrack, TrajectoryError> {
    if track.len() < 2 {
        return Err(TrajectoryError::TooShort(track.len()));
    }
    Ok(DeltaTrack {
        hop_s: track.hop_s,
        values: track.values_log.windows(2).map(|w| w[1] - w[0]).collect(),
    })
}

/// Mean and population variance of voiced linear-Hz values pooled over all tracks.
pub fn speaker_stats<'a, I>(tracks: I) -> Result<SpeakerStats, TrajectoryError>
where
    I: IntoIterator<Item = &'a F0Track>,
{
    let values: Vec<f64> = tracks.into_iter().flat_map(|t| t.voiced_values()).collect();
    if values.is_empty() {
        return Err(TrajectoryError::AllUnvoiced);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(SpeakerStats {
        mean_hz: mean,
        variance_hz2: variance,
        n_frames: values.len(),
    })
}

/// Shifts the trajectory by ln(target.mean / source.mean): multiplicative mean matching.
pub fn rescale_to_target(
    track: &LogF0Track,
    source: &SpeakerStats,
    target: &SpeakerStats,
) -> Result<LogF0Track, TrajectoryError> {
    if !(source.mean_hz > 0.0 && target.mean_hz > 0.0) {
        return Err(TrajectoryError::Invalid(format!(
            "speaker means must be positive (source {}, target {})",
            source.mean_hz, target.mean_hz
        )));
    }
    if source.mean_hz == target.mean_hz {
        return Ok(track.clone());
    }
    track.shifted(target.mean_hz.ln() - source.mean_hz.ln())
}

fn generated(n_frames: usize, hop_s: f64, values: Vec<f64>) -> Result<LogF0Track, TrajectoryError> {
    if n_frames < 2 {
        return Err(TrajectoryError::TooShort(n_frames));
    }
    LogF0Track::from_values(hop_s, values)
}

pub fn gen_flat(
    n_frames: usize,
    hop_s: f64,
    level_log: f64,
) -> Result<LogF0Track, TrajectoryError> {
    generated(n_frames, hop_s, vec![level_log; n_frames])
}

/// `center_log + amplitude_log * sin(2*pi*i / period_frames)`.
pub fn gen_sine(
    n_frames: usize,
    hop_s: f64,
    center_log: f64,
    amplitude_log: f64,
    period_frames: usize,
) -> Result<LogF0Track, TrajectoryError> {
    if period_frames == 0 {
        return Err(TrajectoryError::Invalid(
            "sine period must be at least one frame".into(),
        ));
    }
    let values = (0..n_frames)
        .map(|i| center_log + amplitude_log * (TAU * i as f64 / period_frames as f64).sin())
        .collect();
    generated(n_frames, hop_s, values)
}

/// Affine ramp from `start_log` at frame 0 to `end_log` at frame n-1.
pub fn gen_linear(
    n_frames: usize,
    hop_s: f64,
    start_log: f64,
    end_log: f64,
) -> Result<LogF0Track, TrajectoryError> {
    if n_frames < 2 {
        return Err(TrajectoryError::TooShort(n_frames));
    }
    let last = (n_frames - 1) as f64;
    let values = (0..n_frames)
        .map(|i| {
            let t = i as f64 / last;
            (1.0 - t) * start_log + t * end_log
        })
        .collect();
    generated(n_frames, hop_s, values)
}
