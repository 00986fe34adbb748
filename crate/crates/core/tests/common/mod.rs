//! Synthetic fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use f0kit::audio::{write_wav, AudioClip};
use f0kit::corpus::{save_track, track_path, write_alignment, Phone, Track};
use f0kit::pitch::F0Track;
use f0kit::predictor::{FrameFeatures, TrainingPair};
use f0kit::trajectory::LogF0Track;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const SR: u32 = 16000;

pub fn sine_clip(freq: f64, amp: f64, sr: u32, seconds: f64) -> AudioClip {
    let n = (seconds * sr as f64).round() as usize;
    let samples = (0..n)
        .map(|i| amp * (TAU * freq * i as f64 / sr as f64).sin())
        .collect();
    AudioClip::new(samples, sr).unwrap()
}

/// Vowel-like tone: a few decaying harmonics of `freq`.
pub fn vowel_clip(freq: f64, sr: u32, seconds: f64) -> AudioClip {
    let n = (seconds * sr as f64).round() as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / sr as f64;
            (1..=4)
                .map(|h| 0.4 / h as f64 * (TAU * freq * h as f64 * t).sin())
                .sum::<f64>()
                * 0.8
        })
        .collect();
    AudioClip::new(samples, sr).unwrap()
}

pub struct UttSpec<'a> {
    pub id: &'a str,
    pub speaker: &'a str,
    pub freq_hz: f64,
    pub seconds: f64,
    pub phones: &'a [&'a str],
}

/// Writes wavs, TSV alignments (phones split evenly over the clip), manifest and
/// speakers.json into `dir`. Returns the manifest path.
pub fn write_corpus(dir: &Path, speakers: &[(&str, &str)], utts: &[UttSpec]) -> PathBuf {
    fs::create_dir_all(dir).unwrap();
    let roles: serde_json::Map<String, serde_json::Value> = speakers
        .iter()
        .map(|(s, r)| (s.to_string(), serde_json::Value::String(r.to_string())))
        .collect();
    fs::write(
        dir.join("speakers.json"),
        serde_json::to_string(&roles).unwrap(),
    )
    .unwrap();

    let mut manifest = String::new();
    for u in utts {
        write_wav(
            dir.join(format!("{}.wav", u.id)),
            &vowel_clip(u.freq_hz, SR, u.seconds),
        )
        .unwrap();
        let step = u.seconds / u.phones.len() as f64;
        let phones: Vec<Phone> = u
            .phones
            .iter()
            .enumerate()
            .map(|(k, p)| Phone {
                symbol: p.to_string(),
                start_s: k as f64 * step,
                end_s: if k + 1 == u.phones.len() {
                    u.seconds
                } else {
                    (k + 1) as f64 * step
                },
            })
            .collect();
        write_alignment(dir.join(format!("{}.tsv", u.id)), &phones).unwrap();
        manifest.push_str(&format!(
            "{{\"id\": \"{0}\", \"audio\": \"{0}.wav\", \"speaker\": \"{1}\", \"alignment\": \"{0}.tsv\"}}\n",
            u.id, u.speaker
        ));
    }
    let path = dir.join("corpus.jsonl");
    fs::write(&path, manifest).unwrap();
    path
}

/// Seeded utterance-level F0 tracks: per-utterance base drawn around 140 Hz, a slow
/// vibrato, frame jitter and random unvoiced gaps; `shift_hz` is added to voiced frames.
pub fn synthetic_f0_tracks(
    seed: u64,
    n_utts: usize,
    n_frames: usize,
    shift_hz: f64,
) -> Vec<F0Track> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = Normal::new(140.0, 20.0).unwrap();
    let jitter = Normal::new(0.0, 0.01).unwrap();
    (0..n_utts)
        .map(|_| {
            let b: f64 = base.sample(&mut rng);
            let depth = rng.gen_range(0.03..0.12);
            let period = rng.gen_range(40.0..120.0);
            let phase = rng.gen_range(0.0..TAU);
            let mut frames = Vec::with_capacity(n_frames);
            let mut gap = 0usize;
            for i in 0..n_frames {
                if gap == 0 && rng.gen_bool(0.02) {
                    gap = rng.gen_range(3..12);
                }
                if gap > 0 {
                    gap -= 1;
                    frames.push(None);
                    continue;
                }
                let log = b.ln()
                    + depth * (TAU * i as f64 / period + phase).sin()
                    + jitter.sample(&mut rng);
                frames.push(Some(log.exp() + shift_hz));
            }
            if frames.iter().all(Option::is_none) {
                frames[0] = Some(b + shift_hz);
            }
            F0Track::from_frames(0.005, &frames).unwrap()
        })
        .collect()
}

pub fn write_tracks(dir: &Path, prefix: &str, tracks: impl IntoIterator<Item = Track>) {
    fs::create_dir_all(dir).unwrap();
    for (i, t) in tracks.into_iter().enumerate() {
        save_track(track_path(dir, &format!("{prefix}{i:03}")), &t).unwrap();
    }
}

pub const TOY_PHONEMES: usize = 4;
pub const TOY_SPEAKERS: usize = 2;

/// Learnable toy corpus: per-phone log-F0 levels, a within-phone slope and a
/// speaker offset. Speaker 1 is the target speaker.
pub fn toy_pairs(seed: u64, per_speaker: usize, frames_per_utt: usize) -> Vec<TrainingPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let levels = [0.0, 0.15, -0.1, 0.25];
    let mut pairs = Vec::new();
    for speaker in 0..TOY_SPEAKERS {
        for _ in 0..per_speaker {
            let mut frames = Vec::with_capacity(frames_per_utt);
            let mut oracle = Vec::with_capacity(frames_per_utt);
            while frames.len() < frames_per_utt {
                let phone = rng.gen_range(0..TOY_PHONEMES);
                let len = rng.gen_range(4..12).min(frames_per_utt - frames.len());
                for k in 0..len {
                    let pos = if len > 1 {
                        k as f64 / (len - 1) as f64
                    } else {
                        0.0
                    };
                    frames.push((phone, pos));
                    oracle.push(5.0 + levels[phone] + 0.1 * pos + 0.3 * speaker as f64);
                }
            }
            let features =
                FrameFeatures::from_frames(TOY_PHONEMES, TOY_SPEAKERS, speaker, &frames).unwrap();
            let oracle = LogF0Track::from_values(0.005, oracle).unwrap();
            pairs.push(TrainingPair::new(features, oracle, speaker == 1).unwrap());
        }
    }
    pairs
}

/// Richer toy corpus for loss-curve checks: each phone gets a seeded level, slope and
/// curvature, so the regressor keeps improving for longer than on [`toy_pairs`].
pub fn contour_pairs(
    seed: u64,
    n_phonemes: usize,
    per_speaker: usize,
    frames_per_utt: usize,
) -> Vec<TrainingPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape: Vec<(f64, f64, f64)> = (0..n_phonemes)
        .map(|_| {
            (
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.4..0.4),
            )
        })
        .collect();
    let mut pairs = Vec::new();
    for speaker in 0..TOY_SPEAKERS {
        for _ in 0..per_speaker {
            let mut frames = Vec::with_capacity(frames_per_utt);
            let mut oracle = Vec::with_capacity(frames_per_utt);
            while frames.len() < frames_per_utt {
                let phone = rng.gen_range(0..n_phonemes);
                let len = rng.gen_range(4..16).min(frames_per_utt - frames.len());
                let (level, slope, curve) = shape[phone];
                for k in 0..len {
                    let pos = if len > 1 {
                        k as f64 / (len - 1) as f64
                    } else {
                        0.0
                    };
                    frames.push((phone, pos));
                    oracle
                        .push(5.0 + level + slope * pos + curve * pos * pos + 0.3 * speaker as f64);
                }
            }
            let features =
                FrameFeatures::from_frames(n_phonemes, TOY_SPEAKERS, speaker, &frames).unwrap();
            let oracle = LogF0Track::from_values(0.005, oracle).unwrap();
            pairs.push(TrainingPair::new(features, oracle, speaker == 1).unwrap());
        }
    }
    pairs
}
