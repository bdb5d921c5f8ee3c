//! Image-quality measures: Fréchet distance between embedded image sets,
//! Laplacian-of-Gaussian sharpness and exact t-SNE projection.

mod embed;
mod frechet;
mod inception;
mod sharpness;
mod tsne;

pub use embed::{EmbeddingModel, LiteEmbedder, LiteEmbedderConfig};
pub use frechet::{fid, frechet_distance, frechet_distance_detailed, gaussian_summary, FidReport, FrechetOutcome, GaussianSummary};
pub use inception::InceptionV3;
pub use sharpness::{log_kernel, sharpness, LOG_KERNEL_SIZE, LOG_SIGMA};
pub use tsne::{silhouette, tsne_project, ProjectionMap, TsneConfig};

/// Sample count below which FID is known to be biased upward.
pub const FID_BIAS_THRESHOLD: usize = 2048;

#[derive(Debug, thiserror::Error)]
pub enum QualityError {
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("summaries come from different embedders: {0} vs {1}")]
    EmbedderMismatch(String, String),
    #[error("invalid perplexity {perplexity} for {n} points (needs n >= 3·perplexity)")]
    InvalidPerplexity { perplexity: f64, n: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("embedding weights: {0}")]
    Weights(String),
    #[error("i/o failure on {path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
}
