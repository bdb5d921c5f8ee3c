//! Synthetic periocular image benchmarking: corpus handling, GAN model zoo,
//! training, image-quality metrics and presentation-attack evaluation.

pub mod archive;
pub mod corpus;
pub mod ganzoo;
pub mod quality;
pub mod padlab;
pub mod trainer;

pub type GanModel32 = ganzoo::GanModel<f32>;
pub type GanModel64 = ganzoo::GanModel<f64>;
pub type Checkpoint32 = trainer::Checkpoint<f32>;
pub type Checkpoint64 = trainer::Checkpoint<f64>;
pub type GaussianSummary64 = quality::GaussianSummary<f64>;
pub type ProjectionMap32 = quality::ProjectionMap<f32>;
pub type ProjectionMap64 = quality::ProjectionMap<f64>;
pub type BaselineCnn32 = padlab::BaselineCnn<f32>;
pub type BaselineCnn64 = padlab::BaselineCnn<f64>;
