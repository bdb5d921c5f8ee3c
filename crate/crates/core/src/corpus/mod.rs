//! Periocular image corpus: manifests, labeling, pixel tensors, resizing,
//! augmentation and seeded batching.

mod augment;
mod batch;
mod ingest;
mod manifest;
mod pixels;
pub mod toy;

pub use augment::{augment, augment_traced, AugmentationPolicy, Transform, TransformKind};
pub use batch::{batch_plan, batches, epoch_rng, fit_image, Batch, BatchIter, Dataset, Fit};
pub use ingest::{ingest_directory, IngestFailure, IngestReport, LabelDefaults, LabelRule, LabelingRules};
pub use manifest::{ClassLabel, EyeSide, Gender, ImageRecord, Manifest, MANIFEST_SCHEMA_VERSION};
pub use pixels::{center_crop_resize, resize, PixelTensor, PIXEL_LAYOUT};

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("no decodable images found under {0}")]
    EmptyCorpus(PathBuf),
    #[error("i/o failure on {path}: {source}")]
    IoFailure { path: PathBuf, source: std::io::Error },
    #[error("cannot decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("invalid resize target {width}x{height}")]
    InvalidTarget { width: usize, height: usize },
    #[error("invalid augmentation policy: {0}")]
    InvalidPolicy(String),
    #[error("batch size must be at least 1, got {0}")]
    InvalidBatchSize(usize),
    #[error("invalid labeling rule: {0}")]
    InvalidRule(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("manifest checksum mismatch: stored {stored}, computed {computed}")]
    ChecksumMismatch { stored: String, computed: String },
    #[error("invalid pixel data: {0}")]
    InvalidPixels(String),
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CorpusError::IoFailure { path: path.into(), source }
    }
}
