//! Mono PCM16 WAV loading and fixed-hop framing.

use std::fs;
use std::path::Path;

use thiserror::Error;

/// Amplitude divisor for 16-bit PCM samples.
pub const PCM16_SCALE: f64 = 32768.0;

pub const DEFAULT_HOP_S: f64 = 0.005;
pub const DEFAULT_WINDOW_S: f64 = 0.025;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed wav: {0}")]
    MalformedWav(String),
    #[error("unsupported wav format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid framing: hop {hop_s} s, window {window_s} s")]
    InvalidFraming { hop_s: f64, window_s: f64 },
    #[error("invalid audio clip: {0}")]
    InvalidClip(String),
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Immutable mono clip with amplitudes in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite() || s.abs() > 1.0) {
            return Err(AudioError::InvalidClip(format!(
                "sample {i} outside [-1, 1]: {}",
                samples[i]
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// Number of frames [`frames`](Self::frames) yields for the given framing.
    pub fn frame_count(&self, hop_s: f64, window_s: f64) -> Result<usize, AudioError> {
        validate_framing(hop_s, window_s)?;
        Ok(frame_layout(self.samples.len(), self.sample_rate, hop_s, window_s).0)
    }

    /// Sample windows of `window_s` seconds every `hop_s` seconds.
    ///
    /// Frame `k` starts at sample `round(k * hop_s * sample_rate)`. Only frames
    /// lying entirely inside the clip are produced, so a clip shorter than one
    /// window yields nothing.
    pub fn frames(&self, hop_s: f64, window_s: f64) -> Result<Frames<'_>, AudioError> {
        validate_framing(hop_s, window_s)?;
        let (count, window_len) =
            frame_layout(self.samples.len(), self.sample_rate, hop_s, window_s);
        Ok(Frames {
            clip: self,
            hop_s,
            window_len,
            next: 0,
            count,
        })
    }
}

fn validate_framing(hop_s: f64, window_s: f64) -> Result<(), AudioError> {
    if !(hop_s > 0.0) || !hop_s.is_finite() || !(window_s >= hop_s) || !window_s.is_finite() {
        return Err(AudioError::InvalidFraming { hop_s, window_s });
    }
    Ok(())
}

/// Returns (frame count, window length in samples).
fn frame_layout(n_samples: usize, sample_rate: u32, hop_s: f64, window_s: f64) -> (usize, usize) {
    let sr = sample_rate as f64;
    let window_len = (window_s * sr).round() as usize;
    let duration = n_samples as f64 / sr;
    if window_len == 0 || window_len > n_samples || duration < window_s {
        return (0, window_len);
    }
    // Guard the floor against representation error, e.g. (1.0 - 0.025) / 0.005.
    let mut count = ((duration - window_s) / hop_s + 1e-9).floor() as usize + 1;
    while count > 0 && frame_start(count - 1, hop_s, sr) + window_len > n_samples {
        count -= 1;
    }
    (count, window_len)
}

fn frame_start(k: usize, hop_s: f64, sr: f64) -> usize {
    (k as f64 * hop_s * sr).round() as usize
}

pub struct Frames<'a> {
    clip: &'a AudioClip,
    hop_s: f64,
    window_len: usize,
    next: usize,
    count: usize,
}

impl<'a> Iterator for Frames<'a> {
    type Item = &'a [f64];

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let start = frame_start(self.next, self.hop_s, self.clip.sample_rate as f64);
        self.next += 1;
        Some(&self.clip.samples[start..start + self.window_len])
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.count - self.next;
        (n, Some(n))
    }
}

impl ExactSizeIterator for Frames<'_> {}

pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip, AudioError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_wav(&bytes)
}

/// Parses an in-memory RIFF/WAVE image. Only format tag 1, 16-bit, mono is accepted.
pub fn parse_wav(bytes: &[u8]) -> Result<AudioClip, AudioError> {
    let malformed = |msg: &str| AudioError::MalformedWav(msg.to_string());
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }

    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| malformed("chunk extends past end of file"))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(malformed("fmt chunk too short"));
                }
                let tag = u16::from_le_bytes([body[0], body[1]]);
                let channels = u16::from_le_bytes([body[2], body[3]]);
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes([body[14], body[15]]);
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => {
                data = Some(body);
                break;
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }

    let (tag, channels, rate, bits) = fmt.ok_or_else(|| malformed("no fmt chunk"))?;
    if tag != 1 {
        return Err(AudioError::UnsupportedFormat(format!(
            "audio format tag {tag} (only PCM = 1)"
        )));
    }
    if bits != 16 {
        return Err(AudioError::UnsupportedFormat(format!("{bits}-bit samples")));
    }
    if channels != 1 {
        return Err(AudioError::UnsupportedFormat(format!(
            "{channels} channels"
        )));
    }
    if rate == 0 {
        return Err(malformed("zero sample rate"));
    }
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    if data.len() % 2 != 0 {
        return Err(malformed("data chunk has odd length"));
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / PCM16_SCALE)
        .collect();
    AudioClip::new(samples, rate)
}

/// Serializes a clip as mono PCM16. Amplitudes are scaled by 32768 and saturated.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = clip.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &clip.samples {
        let v = (s * PCM16_SCALE)
            .round()
            .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<(), AudioError> {
    let path = path.as_ref();
    fs::write(path, encode_wav(clip)).map_err(|source| AudioError::Io {
        path: path.display().to_string(),
        source,
    })
}
