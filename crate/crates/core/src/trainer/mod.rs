//! Adversarial training loops, run logs, checkpoints, sample generation and
//! hyperparameter sweeps.

mod checkpoint;
mod config;
mod generate;
mod runlog;
mod sweep;
mod train;

use std::path::PathBuf;

pub use checkpoint::{Checkpoint, CheckpointMeta, RngState, CHECKPOINT_KIND};
pub use config::{Budget, EmbedderChoice, OptimizerConfig, Precision, Seeds, TrainConfig};
pub use generate::{generate, write_generated, GeneratedImage, Provenance};
pub use runlog::{BestCheckpoint, LogRow, RunLog, RunStatus, RUNLOG_HEADER};
pub use sweep::{hyperparameter_sweep, merged_fid_curve, Sweep, SweepAxis, SweepRun};
pub use train::{build_embedder, train, train_dataset, TrainObserver, TrainOptions, TrainOutcome};

use crate::archive::ArchiveError;
use crate::corpus::CorpusError;
use crate::ganzoo::GanError;
use crate::quality::QualityError;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("run diverged at step {step}: {reason}")]
    Diverged { step: u64, reason: String, last_row: Option<LogRow>, log: Box<RunLog> },
    #[error("checkpoint checksum mismatch: {0}")]
    Checksum(PathBuf),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Gan(#[from] GanError),
    #[error(transparent)]
    Quality(#[from] QualityError),
    #[error("i/o failure on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<ArchiveError> for TrainError {
    fn from(e: ArchiveError) -> Self {
        match e {
            ArchiveError::Checksum(p) => TrainError::Checksum(p),
            ArchiveError::Io { path, source } => TrainError::Io { path, source },
            other => TrainError::Checkpoint(other.to_string()),
        }
    }
}

impl TrainError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TrainError::Io { path: path.into(), source }
    }
}
