//! Presentation-attack evaluation: scoring through a pluggable classifier,
//! APCER/BPCER/ACER at a threshold, DET curves and the equal-error point.
//!
//! Scores lie in `[0, 1]` with higher meaning more bona fide. A sample is
//! accepted as bona fide when `score >= threshold`, ties included.

mod baseline;
mod classifier;
mod experiment;
mod metrics;
pub mod reference;

use serde::{Deserialize, Serialize};

pub use baseline::{synthesize_attack, AttackKind, BaselineCnn, BaselineConfig, BASELINE_KIND};
pub use classifier::{read_score_file, score_set, write_score_file, ConstClassifier, FileClassifier, LabeledImage, PadClassifier, ScoreFailure, ScoreSet};
pub use experiment::{unknown_attack_experiment, ExperimentReport, TIE_RULE};
pub use metrics::{d_eer, det_curve, iso_metrics, DetCurve, DetPoint, EqualErrorPoint, IsoMetricsReport};

/// Default operating threshold for single-threshold reports.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroundTruth {
    Bonafide,
    Attack,
}

impl std::fmt::Display for GroundTruth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Bonafide => "bonafide",
            Self::Attack => "attack",
        })
    }
}

impl std::str::FromStr for GroundTruth {
    type Err = PadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bonafide" | "bona_fide" | "bona fide" => Ok(Self::Bonafide),
            "attack" => Ok(Self::Attack),
            other => Err(PadError::Label(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PadScore {
    pub sample_id: String,
    pub ground_truth: GroundTruth,
    pub score: f64,
}

impl PadScore {
    pub fn new(sample_id: impl Into<String>, ground_truth: GroundTruth, score: f64) -> Result<Self, PadError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(PadError::ScoreRange(score));
        }
        Ok(Self { sample_id: sample_id.into(), ground_truth, score })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PadError {
    #[error("scores lack the {0} class")]
    MissingClass(GroundTruth),
    #[error("score {0} outside [0, 1]")]
    ScoreRange(f64),
    #[error("unknown ground-truth label {0:?}")]
    Label(String),
    #[error("no score for sample {0:?}")]
    UnknownSample(String),
    #[error("score file {path}: {reason}")]
    ScoreFile { path: std::path::PathBuf, reason: String },
    #[error("classifier: {0}")]
    Classifier(String),
    #[error(transparent)]
    Archive(#[from] crate::archive::ArchiveError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error("i/o failure on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}

impl PadError {
    pub(crate) fn io(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> Self {
        Self::Io { path: path.into(), source }
    }
}
