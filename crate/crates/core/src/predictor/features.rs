use serde::{Deserialize, Serialize};

use super::PredictorError;
use crate::corpus::Utterance;

/// Boundary tolerance in seconds when placing frame times against phone intervals.
const TIME_TOL: f64 = 1e-9;

/// Frame-level input matrix: phoneme one-hot, position within phone, speaker one-hot.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    n_phonemes: usize,
    n_speakers: usize,
    n_frames: usize,
    data: Vec<f64>,
}

impl FrameFeatures {
    /// Builds features from per-frame (phoneme index, position) pairs.
    pub fn from_frames(
        n_phonemes: usize,
        n_speakers: usize,
        speaker_index: usize,
        frames: &[(usize, f64)],
    ) -> Result<Self, PredictorError> {
        if speaker_index >= n_speakers {
            return Err(PredictorError::InvalidSpeaker {
                index: speaker_index,
                count: n_speakers,
            });
        }
        let dim = n_phonemes + 1 + n_speakers;
        let mut data = vec![0.0; frames.len() * dim];
        for (row, &(phone, pos)) in data.chunks_exact_mut(dim).zip(frames) {
            if phone >= n_phonemes || !(0.0..=1.0).contains(&pos) {
                return Err(PredictorError::DimensionMismatch(format!(
                    "phoneme {phone} of {n_phonemes}, position {pos}"
                )));
            }
            row[phone] = 1.0;
            row[n_phonemes] = pos;
            row[n_phonemes + 1 + speaker_index] = 1.0;
        }
        Ok(Self {
            n_phonemes,
            n_speakers,
            n_frames: frames.len(),
            data,
        })
    }

    /// Wraps an already laid-out row-major matrix of `dim`-wide rows.
    pub fn from_raw(data: Vec<f64>, dim: usize, n_speakers: usize) -> Result<Self, PredictorError> {
        if dim < n_speakers + 1 || !data.len().is_multiple_of(dim.max(1)) {
            return Err(PredictorError::DimensionMismatch(format!(
                "{} values do not form rows of width {dim} with {n_speakers} speakers",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite()) {
            return Err(PredictorError::DimensionMismatch(format!(
                "non-finite feature {bad}"
            )));
        }
        Ok(Self {
            n_phonemes: dim - 1 - n_speakers,
            n_speakers,
            n_frames: data.len() / dim,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.n_phonemes + 1 + self.n_speakers
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_phonemes(&self) -> usize {
        self.n_phonemes
    }

    pub fn n_speakers(&self) -> usize {
        self.n_speakers
    }

    pub fn row(&self, frame: usize) -> &[f64] {
        let dim = self.dim();
        &self.data[frame * dim..(frame + 1) * dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Truncated copy with the first `n` frames.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.n_frames);
        Self {
            data: self.data[..n * self.dim()].to_vec(),
            n_frames: n,
            ..*self
        }
    }
}

/// Featurization layout shared by training and prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub hop_s: f64,
    pub phonemes: Vec<String>,
    pub speakers: Vec<String>,
}

impl FeatureSpec {
    pub fn input_dim(&self) -> usize {
        self.phonemes.len() + 1 + self.speakers.len()
    }

    pub fn speaker_index(&self, speaker: &str) -> Option<usize> {
        self.speakers.iter().position(|s| s == speaker)
    }

    /// Features for frames `i * hop_s` covering the utterance's phones.
    pub fn featurize(&self, utt: &Utterance) -> Result<FrameFeatures, PredictorError> {
        featurize(
            utt,
            self.hop_s,
            &self.phonemes,
            self.speaker_of(utt)?,
            self.speakers.len(),
        )
    }

    /// Like [`featurize`](Self::featurize) but with exactly `n_frames` frames.
    pub fn featurize_to(
        &self,
        utt: &Utterance,
        n_frames: usize,
    ) -> Result<FrameFeatures, PredictorError> {
        featurize_frames(
            utt,
            self.hop_s,
            &self.phonemes,
            self.speaker_of(utt)?,
            self.speakers.len(),
            Some(n_frames),
        )
    }

    fn speaker_of(&self, utt: &Utterance) -> Result<usize, PredictorError> {
        self.speaker_index(&utt.speaker_id)
            .ok_or_else(|| PredictorError::UnknownSpeaker {
                id: utt.id.clone(),
                speaker: utt.speaker_id.clone(),
            })
    }
}

pub fn featurize(
    utt: &Utterance,
    hop_s: f64,
    phoneme_inventory: &[String],
    speaker_index: usize,
    n_speakers: usize,
) -> Result<FrameFeatures, PredictorError> {
    featurize_frames(
        utt,
        hop_s,
        phoneme_inventory,
        speaker_index,
        n_speakers,
        None,
    )
}

/// Frame `i` sits at time `i * hop_s` and takes the phone whose half-open interval
/// `[start, end)` contains it. Its position is its rank among that phone's frames,
/// scaled to [0, 1].
///
/// With `n_frames` set, up to one frame past the last phone is tolerated and
/// inherits the final phone at position 1.
pub fn featurize_frames(
    utt: &Utterance,
    hop_s: f64,
    phoneme_inventory: &[String],
    speaker_index: usize,
    n_speakers: usize,
    n_frames: Option<usize>,
) -> Result<FrameFeatures, PredictorError> {
    if !(hop_s > 0.0) {
        return Err(PredictorError::InvalidHop(hop_s));
    }
    let coverage = |message: String| PredictorError::CoverageGap {
        id: utt.id.clone(),
        message,
    };
    let first = utt
        .phones
        .first()
        .ok_or_else(|| coverage("no phones".into()))?;
    if first.start_s.abs() > TIME_TOL {
        return Err(coverage(format!(
            "first phone starts at {} s",
            first.start_s
        )));
    }
    for (i, w) in utt.phones.windows(2).enumerate() {
        if w[1].start_s < w[0].end_s - TIME_TOL {
            return Err(PredictorError::OverlappingIntervals {
                id: utt.id.clone(),
                index: i + 1,
            });
        }
        if w[1].start_s > w[0].end_s + TIME_TOL {
            return Err(coverage(format!(
                "gap between {} s and {} s",
                w[0].end_s, w[1].start_s
            )));
        }
    }

    let frame_at = |t: f64| ((t - TIME_TOL) / hop_s).ceil().max(0.0) as usize;
    let natural = frame_at(utt.end_s());
    let total = n_frames.unwrap_or(natural);
    if total > natural + 1 {
        return Err(coverage(format!(
            "{total} frames requested but phones cover only {natural}"
        )));
    }

    let mut frames = Vec::with_capacity(total);
    let mut last_phone = 0;
    for phone in &utt.phones {
        let idx = phoneme_inventory
            .iter()
            .position(|p| *p == phone.symbol)
            .ok_or_else(|| PredictorError::UnknownPhoneme {
                id: utt.id.clone(),
                symbol: phone.symbol.clone(),
            })?;
        last_phone = idx;
        let (lo, hi) = (frame_at(phone.start_s), frame_at(phone.end_s));
        let span = hi.saturating_sub(lo);
        for k in 0..span {
            if frames.len() >= total {
                break;
            }
            let pos = if span > 1 {
                k as f64 / (span - 1) as f64
            } else {
                0.0
            };
            frames.push((idx, pos));
        }
    }
    while frames.len() < total {
        frames.push((last_phone, 1.0));
    }
    FrameFeatures::from_frames(phoneme_inventory.len(), n_speakers, speaker_index, &frames)
}
