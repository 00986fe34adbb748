use thiserror::Error;

use crate::audio::AudioError;
use crate::corpus::CorpusError;
use crate::metrics::MetricsError;
use crate::pitch::PitchError;
use crate::predictor::PredictorError;
use crate::trajectory::TrajectoryError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Pitch(#[from] PitchError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("corpus has no utterances")]
    EmptyCorpus,
    #[error("track ids differ: only in first: {only_a:?}; only in second: {only_b:?}")]
    IdMismatch {
        only_a: Vec<String>,
        only_b: Vec<String>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("utterance {id}: {source}")]
    Utterance {
        id: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Stable machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Audio(e) => audio_kind(e),
            Error::Pitch(e) => match e {
                PitchError::ConfigOutOfRange(_) => "ConfigOutOfRange",
                PitchError::InvalidTrack(_) => "InvalidTrack",
                PitchError::Audio(inner) => audio_kind(inner),
            },
            Error::Trajectory(e) => trajectory_kind(e),
            Error::Metrics(e) => match e {
                MetricsError::LengthMismatch(..) => "LengthMismatch",
                MetricsError::HopMismatch(..) => "HopMismatch",
                MetricsError::TooShort { .. } => "TooShort",
                MetricsError::EmptyInput => "EmptyInput",
                MetricsError::BadRange(_) => "BadRange",
                MetricsError::BinMismatch => "BinMismatch",
            },
            Error::Predictor(e) => match e {
                PredictorError::UnknownPhoneme { .. } => "UnknownPhoneme",
                PredictorError::OverlappingIntervals { .. } => "OverlappingIntervals",
                PredictorError::CoverageGap { .. } => "CoverageGap",
                PredictorError::UnknownSpeaker { .. } | PredictorError::InvalidSpeaker { .. } => {
                    "UnknownSpeaker"
                }
                PredictorError::InvalidHop(_) | PredictorError::InvalidConfig(_) => "InvalidConfig",
                PredictorError::LengthMismatch(..) => "LengthMismatch",
                PredictorError::DimensionMismatch(_) => "DimensionMismatch",
                PredictorError::NonFiniteLoss { .. } => "NonFiniteLoss",
                PredictorError::Persist(_) => "ModelFormat",
                PredictorError::SchemaVersionMismatch { .. } => "SchemaVersionMismatch",
                PredictorError::Trajectory(inner) => trajectory_kind(inner),
            },
            Error::Corpus(e) => match e {
                CorpusError::Parse { .. } => "ParseError",
                CorpusError::MissingAudio { .. } => "MissingAudio",
                CorpusError::InvalidAlignment { .. } => "InvalidAlignment",
                CorpusError::SchemaVersionMismatch { .. } => "SchemaVersionMismatch",
                CorpusError::InvalidTrack { .. } => "InvalidTrack",
                CorpusError::Io { .. } => "IoError",
            },
            Error::EmptyCorpus => "EmptyCorpus",
            Error::IdMismatch { .. } => "IdMismatch",
            Error::InvalidArgument(_) => "InvalidArgument",
            Error::Io { .. } => "IoError",
            Error::Utterance { source, .. } => source.kind(),
        }
    }

    /// Utterance the failure belongs to, when known.
    pub fn utterance_id(&self) -> Option<&str> {
        match self {
            Error::Utterance { id, .. } => Some(id),
            Error::Corpus(e) => e.utterance_id(),
            Error::Predictor(
                PredictorError::UnknownPhoneme { id, .. }
                | PredictorError::OverlappingIntervals { id, .. }
                | PredictorError::CoverageGap { id, .. }
                | PredictorError::UnknownSpeaker { id, .. },
            ) => Some(id),
            _ => None,
        }
    }

    pub(crate) fn in_utterance(self, id: &str) -> Self {
        if self.utterance_id().is_some() {
            return self;
        }
        Error::Utterance {
            id: id.to_string(),
            source: Box::new(self),
        }
    }
}

fn trajectory_kind(e: &TrajectoryError) -> &'static str {
    match e {
        TrajectoryError::AllUnvoiced => "AllUnvoiced",
        TrajectoryError::TooShort(_) => "TooShort",
        TrajectoryError::OutOfSanityBounds { .. } => "OutOfSanityBounds",
        TrajectoryError::Invalid(_) => "InvalidTrack",
    }
}

fn audio_kind(e: &AudioError) -> &'static str {
    match e {
        AudioError::MalformedWav(_) => "MalformedWav",
        AudioError::UnsupportedFormat(_) => "UnsupportedFormat",
        AudioError::InvalidFraming { .. } => "InvalidFraming",
        AudioError::InvalidClip(_) => "InvalidClip",
        AudioError::Io { .. } => "IoError",
    }
}
