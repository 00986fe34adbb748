//! Corpus manifests, phone alignments and track persistence.
//!
//! A manifest is JSON Lines, one `{"id", "audio", "speaker", "alignment"}` object per
//! utterance. Speaker roles live in a sibling `speakers.json` mapping speaker id to
//! `"target"` or `"supporting"`. Alignments are TSV files with `phone`, `start_s`,
//! `end_s` columns. Relative paths resolve against the manifest's directory.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pitch::F0Track;
use crate::trajectory::LogF0Track;

pub const SCHEMA_VERSION: u32 = 1;
pub const SPEAKERS_FILE: &str = "speakers.json";
/// File suffix of persisted tracks inside a track directory.
pub const TRACK_SUFFIX: &str = ".track.json";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{file}:{line}: {field}: {message}")]
    Parse {
        file: String,
        line: usize,
        field: String,
        message: String,
    },
    #[error("utterance {id}: audio file {path} not found")]
    MissingAudio { id: String, path: String },
    #[error("utterance {id}: invalid alignment: {message}")]
    InvalidAlignment { id: String, message: String },
    #[error("{path}: unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    SchemaVersionMismatch { path: String, found: u64 },
    #[error("{path}: {message}")]
    InvalidTrack { path: String, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Utterance the error refers to, when there is one.
    pub fn utterance_id(&self) -> Option<&str> {
        match self {
            CorpusError::MissingAudio { id, .. } | CorpusError::InvalidAlignment { id, .. } => {
                Some(id)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phone {
    pub symbol: String,
    pub start_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub audio_path: PathBuf,
    pub speaker_id: String,
    pub phones: Vec<Phone>,
}

impl Utterance {
    /// Checks that intervals are positive-length, non-negative, ascending and non-overlapping.
    pub fn validate_phones(&self) -> Result<(), CorpusError> {
        let bad = |message: String| CorpusError::InvalidAlignment {
            id: self.id.clone(),
            message,
        };
        for (i, p) in self.phones.iter().enumerate() {
            if !(p.start_s >= 0.0 && p.end_s > p.start_s && p.end_s.is_finite()) {
                return Err(bad(format!(
                    "phone {i} ({}) has interval [{}, {}]",
                    p.symbol, p.start_s, p.end_s
                )));
            }
        }
        for (i, w) in self.phones.windows(2).enumerate() {
            if w[1].start_s < w[0].end_s {
                return Err(bad(format!(
                    "phone {} ({}) starts at {} before phone {i} ends at {}",
                    i + 1,
                    w[1].symbol,
                    w[1].start_s,
                    w[0].end_s
                )));
            }
        }
        Ok(())
    }

    pub fn end_s(&self) -> f64 {
        self.phones.last().map_or(0.0, |p| p.end_s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerRole {
    Target,
    Supporting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub utterances: Vec<Utterance>,
    pub speakers: BTreeMap<String, SpeakerRole>,
}

impl Corpus {
    /// Speaker ids in sorted order; the index of a speaker here is its one-hot slot.
    pub fn speaker_ids(&self) -> Vec<String> {
        self.speakers.keys().cloned().collect()
    }

    pub fn role(&self, speaker: &str) -> Option<SpeakerRole> {
        self.speakers.get(speaker).copied()
    }

    /// Sorted set of phone symbols used anywhere in the corpus.
    pub fn phoneme_inventory(&self) -> Vec<String> {
        let mut set: Vec<String> = self
            .utterances
            .iter()
            .flat_map(|u| u.phones.iter().map(|p| p.symbol.clone()))
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        set.sort();
        set
    }

    pub fn get(&self, id: &str) -> Option<&Utterance> {
        self.utterances.iter().find(|u| u.id == id)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestLine {
    id: String,
    audio: String,
    speaker: String,
    alignment: String,
}

/// Loads a manifest and the `speakers.json` next to it.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let speakers = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(SPEAKERS_FILE);
    load_manifest_with_speakers(path, speakers)
}

pub fn load_manifest_with_speakers(
    manifest: impl AsRef<Path>,
    speakers: impl AsRef<Path>,
) -> Result<Corpus, CorpusError> {
    let manifest = manifest.as_ref();
    let speakers_path = speakers.as_ref();
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let file = manifest.display().to_string();

    let speakers_text =
        fs::read_to_string(speakers_path).map_err(|e| CorpusError::io(speakers_path, e))?;
    let speakers: BTreeMap<String, SpeakerRole> =
        serde_json::from_str(&speakers_text).map_err(|e| CorpusError::Parse {
            file: speakers_path.display().to_string(),
            line: e.line(),
            field: "speakers".into(),
            message: e.to_string(),
        })?;

    let text = fs::read_to_string(manifest).map_err(|e| CorpusError::io(manifest, e))?;
    let mut seen = HashSet::new();
    let mut utterances = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parse_err = |field: &str, message: String| CorpusError::Parse {
            file: file.clone(),
            line,
            field: field.to_string(),
            message,
        };
        let entry: ManifestLine =
            serde_json::from_str(raw).map_err(|e| parse_err("entry", e.to_string()))?;
        if entry.id.is_empty() {
            return Err(parse_err("id", "empty utterance id".into()));
        }
        if !seen.insert(entry.id.clone()) {
            return Err(parse_err(
                "id",
                format!("duplicate utterance id {}", entry.id),
            ));
        }
        if !speakers.contains_key(&entry.speaker) {
            return Err(parse_err(
                "speaker",
                format!(
                    "utterance {}: speaker {} not in {}",
                    entry.id,
                    entry.speaker,
                    speakers_path.display()
                ),
            ));
        }
        let audio_path = base.join(&entry.audio);
        if !audio_path.is_file() {
            return Err(CorpusError::MissingAudio {
                id: entry.id,
                path: audio_path.display().to_string(),
            });
        }
        let phones = read_alignment(base.join(&entry.alignment), &entry.id)?;
        let utt = Utterance {
            id: entry.id,
            audio_path,
            speaker_id: entry.speaker,
            phones,
        };
        utt.validate_phones()?;
        utterances.push(utt);
    }
    Ok(Corpus {
        utterances,
        speakers,
    })
}

/// Reads a `phone<TAB>start_s<TAB>end_s` alignment. A leading header row is skipped.
pub fn read_alignment(path: impl AsRef<Path>, id: &str) -> Result<Vec<Phone>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let mut phones = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() || (idx == 0 && raw.starts_with("phone\t")) {
            continue;
        }
        let bad = |field: &str, message: String| CorpusError::Parse {
            file: path.display().to_string(),
            line: idx + 1,
            field: field.to_string(),
            message: format!("utterance {id}: {message}"),
        };
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 3 {
            return Err(bad(
                "row",
                format!("expected 3 tab-separated columns, got {}", cols.len()),
            ));
        }
        let num = |field: &str, s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| bad(field, format!("{s:?}: {e}")))
        };
        phones.push(Phone {
            symbol: cols[0].trim().to_string(),
            start_s: num("start_s", cols[1])?,
            end_s: num("end_s", cols[2])?,
        });
    }
    Ok(phones)
}

pub fn write_alignment(path: impl AsRef<Path>, phones: &[Phone]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut out = String::from("phone\tstart_s\tend_s\n");
    for p in phones {
        out.push_str(&format!("{}\t{:.6}\t{:.6}\n", p.symbol, p.start_s, p.end_s));
    }
    fs::write(path, out).map_err(|e| CorpusError::io(path, e))
}

/// A persisted trajectory: raw pitch or interpolated log-F0.
#[derive(Debug, Clone, PartialEq)]
pub enum Track {
    F0(F0Track),
    Log(LogF0Track),
}

impl Track {
    pub fn len(&self) -> usize {
        match self {
            Track::F0(t) => t.len(),
            Track::Log(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hop_s(&self) -> f64 {
        match self {
            Track::F0(t) => t.hop_s(),
            Track::Log(t) => t.hop_s(),
        }
    }
}

impl From<F0Track> for Track {
    fn from(t: F0Track) -> Self {
        Track::F0(t)
    }
}

impl From<LogF0Track> for Track {
    fn from(t: LogF0Track) -> Self {
        Track::Log(t)
    }
}

#[derive(Serialize, Deserialize)]
struct TrackFile {
    schema_version: u32,
    hop_s: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    log: bool,
    frames: Vec<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    voiced_mask: Option<Vec<bool>>,
}

pub fn encode_track(track: &Track) -> String {
    let file = match track {
        Track::F0(t) => TrackFile {
            schema_version: SCHEMA_VERSION,
            hop_s: t.hop_s(),
            log: false,
            frames: (0..t.len()).map(|i| t.frame(i)).collect(),
            voiced_mask: None,
        },
        Track::Log(t) => TrackFile {
            schema_version: SCHEMA_VERSION,
            hop_s: t.hop_s(),
            log: true,
            frames: t.values_log().iter().map(|&v| Some(v)).collect(),
            voiced_mask: Some(t.voiced_mask().to_vec()),
        },
    };
    let mut s = serde_json::to_string(&file).expect("track serializes");
    s.push('\n');
    s
}

pub fn decode_track(text: &str, origin: &str) -> Result<Track, CorpusError> {
    let invalid = |message: String| CorpusError::InvalidTrack {
        path: origin.to_string(),
        message,
    };
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| invalid(e.to_string()))?;
    let version = value
        .get("schema_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| invalid("missing schema_version".into()))?;
    if version != SCHEMA_VERSION as u64 {
        return Err(CorpusError::SchemaVersionMismatch {
            path: origin.to_string(),
            found: version,
        });
    }
    let file: TrackFile = serde_json::from_value(value).map_err(|e| invalid(e.to_string()))?;
    if file.log {
        let mask = file
            .voiced_mask
            .ok_or_else(|| invalid("log track without voiced_mask".into()))?;
        let values = file
            .frames
            .iter()
            .enumerate()
            .map(|(i, f)| f.ok_or_else(|| invalid(format!("log track has null frame {i}"))))
            .collect::<Result<Vec<_>, _>>()?;
        LogF0Track::new(file.hop_s, values, mask)
            .map(Track::Log)
            .map_err(|e| invalid(e.to_string()))
    } else {
        F0Track::from_frames(file.hop_s, &file.frames)
            .map(Track::F0)
            .map_err(|e| invalid(e.to_string()))
    }
}

pub fn save_track(path: impl AsRef<Path>, track: &Track) -> Result<(), CorpusError> {
    let path = path.as_ref();
    fs::write(path, encode_track(track)).map_err(|e| CorpusError::io(path, e))
}

pub fn load_track(path: impl AsRef<Path>) -> Result<Track, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    decode_track(&text, &path.display().to_string())
}

pub fn track_path(dir: impl AsRef<Path>, id: &str) -> PathBuf {
    dir.as_ref().join(format!("{id}{TRACK_SUFFIX}"))
}

/// Loads every `*.track.json` in `dir`, keyed and ordered by utterance id.
pub fn load_track_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, Track>, CorpusError> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| CorpusError::io(dir, e))? {
        let entry = entry.map_err(|e| CorpusError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(id) = name.strip_suffix(TRACK_SUFFIX) {
            out.insert(id.to_string(), load_track(entry.path())?);
        }
    }
    Ok(out)
}
