//! Frame-wise F0 estimation with the YIN cumulative-mean-normalized difference function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{AudioClip, AudioError, DEFAULT_HOP_S, DEFAULT_WINDOW_S};

#[derive(Debug, Error)]
pub enum PitchError {
    #[error("pitch config out of range: {0}")]
    ConfigOutOfRange(String),
    #[error("invalid f0 track: {0}")]
    InvalidTrack(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
}

/// Per-frame linear-Hz pitch with voicing flags. Unvoiced frames carry 0.0.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    hop_s: f64,
    values_hz: Vec<f64>,
    voiced: Vec<bool>,
}

impl F0Track {
    pub fn new(hop_s: f64, values_hz: Vec<f64>, voiced: Vec<bool>) -> Result<Self, PitchError> {
        if !(hop_s > 0.0 && hop_s.is_finite()) {
            return Err(PitchError::InvalidTrack(format!(
                "hop {hop_s} must be positive"
            )));
        }
        if values_hz.len() != voiced.len() {
            return Err(PitchError::InvalidTrack(format!(
                "{} values but {} voicing flags",
                values_hz.len(),
                voiced.len()
            )));
        }
        for (i, (&v, &on)) in values_hz.iter().zip(&voiced).enumerate() {
            if on && !(v > 0.0 && v.is_finite()) {
                return Err(PitchError::InvalidTrack(format!(
                    "voiced frame {i} has non-positive value {v}"
                )));
            }
        }
        let values_hz = values_hz
            .into_iter()
            .zip(&voiced)
            .map(|(v, &on)| if on { v } else { 0.0 })
            .collect();
        Ok(Self {
            hop_s,
            values_hz,
            voiced,
        })
    }

    /// Builds a track from optional frames; `None` marks an unvoiced frame.
    pub fn from_frames(hop_s: f64, frames: &[Option<f64>]) -> Result<Self, PitchError> {
        let voiced = frames.iter().map(Option::is_some).collect();
        let values = frames.iter().map(|f| f.unwrap_or(0.0)).collect();
        Self::new(hop_s, values, voiced)
    }

    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    pub fn values_hz(&self) -> &[f64] {
        &self.values_hz
    }

    pub fn voiced(&self) -> &[bool] {
        &self.voiced
    }

    pub fn len(&self) -> usize {
        self.voiced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voiced.is_empty()
    }

    pub fn frame(&self, i: usize) -> Option<f64> {
        self.voiced[i].then(|| self.values_hz[i])
    }

    pub fn voiced_count(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    /// Voiced values in frame order.
    pub fn voiced_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values_hz
            .iter()
            .zip(&self.voiced)
            .filter_map(|(&v, &on)| on.then_some(v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchConfig {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub hop_s: f64,
    pub window_s: f64,
    pub voicing_threshold: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        Self {
            fmin_hz: 50.0,
            fmax_hz: 600.0,
            hop_s: DEFAULT_HOP_S,
            window_s: DEFAULT_WINDOW_S,
            voicing_threshold: 0.1,
        }
    }
}

impl PitchConfig {
    /// Analysis window actually used: widened to hold two periods at `fmin_hz`.
    pub fn effective_window_s(&self) -> f64 {
        self.window_s.max(2.0 / self.fmin_hz)
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), PitchError> {
        let nyquist = sample_rate as f64 / 2.0;
        let bad = |msg: String| Err(PitchError::ConfigOutOfRange(msg));
        if !(self.fmin_hz > 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz < nyquist) {
            return bad(format!(
                "need 0 < fmin ({}) < fmax ({}) < nyquist ({nyquist})",
                self.fmin_hz, self.fmax_hz
            ));
        }
        if !(self.hop_s > 0.0 && self.hop_s.is_finite()) {
            return bad(format!("hop {} must be positive", self.hop_s));
        }
        if !(self.window_s > 0.0 && self.window_s.is_finite()) {
            return bad(format!("window {} must be positive", self.window_s));
        }
        if !(self.voicing_threshold > 0.0 && self.voicing_threshold < 1.0) {
            return bad(format!(
                "voicing threshold {} not in (0, 1)",
                self.voicing_threshold
            ));
        }
        if self.effective_window_s() < self.hop_s {
            return bad(format!(
                "window {} shorter than hop {}",
                self.effective_window_s(),
                self.hop_s
            ));
        }
        Ok(())
    }
}

/// Number of frames [`extract_f0`] produces for `n_samples` at `sample_rate`.
pub fn frame_count(
    n_samples: usize,
    sample_rate: u32,
    cfg: &PitchConfig,
) -> Result<usize, PitchError> {
    cfg.validate(sample_rate)?;
    let clip = AudioClip::new(vec![0.0; n_samples], sample_rate)?;
    Ok(clip.frame_count(cfg.hop_s, cfg.effective_window_s())?)
}

pub fn extract_f0(clip: &AudioClip, cfg: &PitchConfig) -> Result<F0Track, PitchError> {
    cfg.validate(clip.sample_rate())?;
    let sr = clip.sample_rate() as f64;
    let window_s = cfg.effective_window_s();
    let window_len = (window_s * sr).round() as usize;
    let lags = LagRange::new(sr, cfg, window_len)?;

    let mut diff = vec![0.0; lags.max + 2];
    let mut values = Vec::new();
    let mut voiced = Vec::new();
    for frame in clip.frames(cfg.hop_s, window_s)? {
        match yin_frame(frame, &lags, cfg.voicing_threshold, &mut diff) {
            Some(period) => {
                values.push((sr / period).clamp(cfg.fmin_hz, cfg.fmax_hz));
                voiced.push(true);
            }
            None => {
                values.push(0.0);
                voiced.push(false);
            }
        }
    }
    F0Track::new(cfg.hop_s, values, voiced)
}

struct LagRange {
    min: usize,
    max: usize,
    integration: usize,
}

impl LagRange {
    fn new(sr: f64, cfg: &PitchConfig, window_len: usize) -> Result<Self, PitchError> {
        let max = (sr / cfg.fmin_hz).ceil() as usize;
        let min = ((sr / cfg.fmax_hz).floor() as usize).max(2);
        if max + 2 > window_len || min >= max {
            return Err(PitchError::ConfigOutOfRange(format!(
                "window of {window_len} samples cannot hold lags {min}..={max}"
            )));
        }
        Ok(Self {
            min,
            max,
            integration: window_len - max - 1,
        })
    }
}

/// Returns the refined period in samples, or `None` for an unvoiced frame.
fn yin_frame(frame: &[f64], lags: &LagRange, threshold: f64, cmnd: &mut [f64]) -> Option<f64> {
    let w = lags.integration;
    let top = lags.max + 1;

    // difference function d(tau)
    cmnd[0] = 0.0;
    for tau in 1..=top {
        let mut acc = 0.0;
        for j in 0..w {
            let delta = frame[j] - frame[j + tau];
            acc += delta * delta;
        }
        cmnd[tau] = acc;
    }

    // cumulative mean normalization, d'(0) = 1
    let mut running = 0.0;
    cmnd[0] = 1.0;
    for (tau, d) in cmnd.iter_mut().enumerate().take(top + 1).skip(1) {
        running += *d;
        *d = if running > 0.0 {
            *d * tau as f64 / running
        } else {
            1.0
        };
    }

    let mut tau = (lags.min..=lags.max).find(|&t| cmnd[t] < threshold)?;
    while tau < lags.max && cmnd[tau + 1] < cmnd[tau] {
        tau += 1;
    }
    Some(parabolic_peak(cmnd, tau))
}

/// Vertex of the parabola through (tau-1, tau, tau+1).
fn parabolic_peak(y: &[f64], tau: usize) -> f64 {
    if tau == 0 || tau + 1 >= y.len() {
        return tau as f64;
    }
    let (a, b, c) = (y[tau - 1], y[tau], y[tau + 1]);
    let denom = a - 2.0 * b + c;
    if denom.abs() < f64::EPSILON {
        return tau as f64;
    }
    let shift = 0.5 * (a - c) / denom;
    if shift.abs() > 1.0 {
        tau as f64
    } else {
        tau as f64 + shift
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::TAU;

    fn sine(freq: f64, amp: f64, sr: u32, seconds: f64) -> AudioClip {
        let n = (seconds * sr as f64) as usize;
        let samples = (0..n)
            .map(|i| amp * (TAU * freq * i as f64 / sr as f64).sin())
            .collect();
        AudioClip::new(samples, sr).unwrap()
    }

    #[test]
    fn sine_220_interior_frames_within_one_percent() {
        let track = extract_f0(&sine(220.0, 0.5, 16000, 1.0), &PitchConfig::default()).unwrap();
        let n = track.len();
        assert_eq!(n, 193);
        for i in 1..n - 1 {
            let f = track.frame(i).expect("interior frame voiced");
            assert!((f - 220.0).abs() <= 2.2, "frame {i}: {f}");
        }
    }

    #[test]
    fn silence_is_unvoiced() {
        let clip = AudioClip::new(vec![0.0; 16000], 16000).unwrap();
        let track = extract_f0(&clip, &PitchConfig::default()).unwrap();
        assert!(!track.is_empty());
        assert_eq!(track.voiced_count(), 0);
    }

    #[test]
    fn white_noise_mostly_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples = (0..16000).map(|_| rng.gen_range(-0.5..=0.5)).collect();
        let clip = AudioClip::new(samples, 16000).unwrap();
        let track = extract_f0(&clip, &PitchConfig::default()).unwrap();
        let unvoiced = track.len() - track.voiced_count();
        assert!(
            unvoiced as f64 >= 0.9 * track.len() as f64,
            "{unvoiced}/{}",
            track.len()
        );
    }

    #[test]
    fn config_violations() {
        let clip = sine(100.0, 0.5, 16000, 0.2);
        let mut cfg = PitchConfig {
            fmax_hz: 9000.0,
            ..PitchConfig::default()
        };
        assert!(matches!(
            extract_f0(&clip, &cfg),
            Err(PitchError::ConfigOutOfRange(_))
        ));
        cfg.fmax_hz = 40.0;
        assert!(extract_f0(&clip, &cfg).is_err());
        cfg = PitchConfig {
            voicing_threshold: 1.0,
            ..PitchConfig::default()
        };
        assert!(extract_f0(&clip, &cfg).is_err());
    }

    #[test]
    fn window_widens_for_low_fmin() {
        let cfg = PitchConfig::default();
        assert_eq!(cfg.effective_window_s(), 0.04);
        let cfg = PitchConfig {
            fmin_hz: 100.0,
            ..cfg
        };
        assert_eq!(cfg.effective_window_s(), 0.025);
    }

    #[test]
    fn length_independent_of_content() {
        let cfg = PitchConfig::default();
        let a = extract_f0(&sine(150.0, 0.3, 16000, 0.7), &cfg).unwrap();
        let b = extract_f0(&AudioClip::new(vec![0.0; 11200], 16000).unwrap(), &cfg).unwrap();
        assert_eq!(a.len(), b.len());
        assert_eq!(frame_count(11200, 16000, &cfg).unwrap(), a.len());
    }

    #[test]
    fn deterministic() {
        let clip = sine(133.0, 0.4, 16000, 0.5);
        let cfg = PitchConfig::default();
        assert_eq!(
            extract_f0(&clip, &cfg).unwrap(),
            extract_f0(&clip, &cfg).unwrap()
        );
    }

    #[test]
    fn track_invariants() {
        assert!(F0Track::new(0.005, vec![100.0, 0.0], vec![true, true]).is_err());
        assert!(F0Track::new(0.005, vec![100.0], vec![true, false]).is_err());
        assert!(F0Track::new(0.0, vec![], vec![]).is_err());
        let t = F0Track::from_frames(0.005, &[Some(100.0), None]).unwrap();
        assert_eq!(t.frame(1), None);
        assert_eq!(t.voiced_values().collect::<Vec<_>>(), vec![100.0]);
    }
}
