//! Audio ingestion: WAV loading, mono mixdown, resampling to the common
//! 44.1 kHz rate, and manifest-driven corpus description.

mod manifest;
mod resample;
mod wav;

pub use manifest::{load_manifest, write_manifest, ClipRecord};
pub use resample::resample;
pub use wav::{load_wav, write_wav_pcm16};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Target rate every clip is converted to before feature extraction.
pub const COMMON_RATE: u32 = 44_100;

/// Class label attached to a clip or extracted sample. Serializes as the
/// manifest token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "cough_healthy")]
    HealthyCough,
    #[serde(rename = "cough_covid")]
    CovidCough,
    #[serde(rename = "non_cough")]
    NonCough,
    #[serde(rename = "unlabeled")]
    Unlabeled,
}

impl Label {
    /// Manifest token for this label.
    pub fn token(self) -> &'static str {
        match self {
            Label::HealthyCough => "cough_healthy",
            Label::CovidCough => "cough_covid",
            Label::NonCough => "non_cough",
            Label::Unlabeled => "unlabeled",
        }
    }

    pub fn from_token(tok: &str) -> Option<Self> {
        match tok {
            "cough_healthy" => Some(Label::HealthyCough),
            "cough_covid" => Some(Label::CovidCough),
            "non_cough" => Some(Label::NonCough),
            "unlabeled" => Some(Label::Unlabeled),
            _ => None,
        }
    }

    /// True for either cough class.
    pub fn is_cough(self) -> bool {
        matches!(self, Label::HealthyCough | Label::CovidCough)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A mono recording with its provenance. Samples are normalized to
/// [-1, 1] at load time; clips are immutable once created.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub subject_id: String,
    pub label: Label,
    pub source: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self {
            samples,
            sample_rate,
            subject_id: String::new(),
            label: Label::Unlabeled,
            source: String::new(),
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Errors raised while ingesting audio files and manifests.
#[derive(Debug, thiserror::Error)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV codec: format tag {format}, {bits} bits per sample")]
    UnsupportedCodec { format: u16, bits: u16 },
    #[error("unsupported channel count: {0}")]
    UnsupportedChannels(u16),
    #[error("WAV file contains zero samples")]
    ZeroSamples,
    #[error("invalid sample rate: {0}")]
    InvalidRate(u32),
    #[error("manifest row {row}: missing column `{column}`")]
    MissingColumn { row: usize, column: String },
    #[error("manifest row {row}: unknown label token `{token}`")]
    UnknownLabel { row: usize, token: String },
    #[error("manifest row {row}: duplicate (subject_id, path) pair `{subject}`, `{path}`")]
    DuplicateRecord {
        row: usize,
        subject: String,
        path: String,
    },
    #[error("manifest is missing header columns: {0}")]
    BadManifestHeader(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest parse error: {0}")]
    Csv(#[from] csv::Error),
}
