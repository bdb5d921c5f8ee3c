//! GAN model zoo: a conditional DCGAN-style generator/critic pair shared by
//! cGAN, WGAN and WGAN-GP, and a reduced StyleGAN2 generator. Networks are
//! plain functions of a [`ParamSet`](spai_autograd::ParamSet) bound into the
//! autodiff graph.

mod arch;
mod dcgan;
mod latent;
mod losses;
pub(crate) mod model;
mod noise;
mod stylegan;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::Gender;

pub use arch::{ArchDescriptor, CriticArch, DenseSpec, GeneratorArch};
pub use latent::{latent_rng, latent_tensor, one_hot, sample_latent, LatentCode};
pub use losses::{
    adversarial_losses, adversarial_losses_from_logits, generator_loss_from_logits, clip_weights, clip_weights_in_place, gradient_penalty,
    gradient_penalty_at, wasserstein_critic_loss, wasserstein_generator_loss, GeneratorLossKind,
};
pub use model::{critic_forward, generator_forward, mapping_forward, GanModel};
pub use noise::{NoiseSource, PerSampleNoise, RngNoise, ZeroNoise};

#[derive(Debug, thiserror::Error)]
pub enum GanError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("conditioning error: {0}")]
    Conditioning(String),
    #[error("score outside the loss domain: {0}")]
    Domain(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("clip bound must be positive and finite, got {0}")]
    InvalidBound(f64),
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cgan,
    Wgan,
    WganGp,
    Stylegan2Lite,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Cgan, ModelKind::Wgan, ModelKind::WganGp, ModelKind::Stylegan2Lite];

    pub fn is_conditional(self) -> bool {
        self == ModelKind::Cgan
    }

    pub fn is_wasserstein(self) -> bool {
        matches!(self, ModelKind::Wgan | ModelKind::WganGp)
    }

    pub fn default_latent_dim(self) -> usize {
        if self == ModelKind::Stylegan2Lite {
            512
        } else {
            128
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Cgan => "cgan",
            ModelKind::Wgan => "wgan",
            ModelKind::WganGp => "wgan_gp",
            ModelKind::Stylegan2Lite => "stylegan2_lite",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL.into_iter().find(|k| k.to_string() == s).ok_or_else(|| format!("unknown model kind {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSize {
    pub width: usize,
    pub height: usize,
}

impl ImageSize {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }
}

impl fmt::Display for ImageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

/// Class condition of the conditional generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionLabel {
    Female,
    Male,
}

impl ConditionLabel {
    pub const COUNT: usize = 2;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn flipped(self) -> Self {
        match self {
            ConditionLabel::Female => ConditionLabel::Male,
            ConditionLabel::Male => ConditionLabel::Female,
        }
    }
}

impl TryFrom<Gender> for ConditionLabel {
    type Error = GanError;

    fn try_from(g: Gender) -> Result<Self, GanError> {
        match g {
            Gender::Female => Ok(ConditionLabel::Female),
            Gender::Male => Ok(ConditionLabel::Male),
            Gender::Unknown => Err(GanError::Conditioning("record has unknown gender".into())),
        }
    }
}

impl fmt::Display for ConditionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditionLabel::Female => "female",
            ConditionLabel::Male => "male",
        })
    }
}
