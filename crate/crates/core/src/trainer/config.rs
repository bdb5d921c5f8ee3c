use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TrainError;
use crate::ganzoo::{GeneratorLossKind, ImageSize, ModelKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OptimizerConfig {
    Adam { beta1: f64, beta2: f64 },
    Rmsprop { alpha: f64 },
}

impl OptimizerConfig {
    /// Adam betas per model family; RMSprop for WGAN.
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Wgan => OptimizerConfig::Rmsprop { alpha: 0.99 },
            ModelKind::WganGp => OptimizerConfig::Adam { beta1: 0.5, beta2: 0.9 },
            ModelKind::Stylegan2Lite => OptimizerConfig::Adam { beta1: 0.0, beta2: 0.99 },
            ModelKind::Cgan => OptimizerConfig::Adam { beta1: 0.5, beta2: 0.999 },
        }
    }
}

/// Training length, in passes over the corpus or thousands of images shown
/// to the critic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Budget {
    Epochs(f64),
    Kimg(f64),
}

impl Budget {
    pub fn images(&self, dataset_len: usize) -> f64 {
        match *self {
            Budget::Epochs(e) => e * dataset_len as f64,
            Budget::Kimg(k) => k * 1000.0,
        }
    }

    fn value(&self) -> f64 {
        match *self {
            Budget::Epochs(v) | Budget::Kimg(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    /// Parameter initialization.
    pub init: u64,
    /// Shuffling and augmentation.
    pub data: u64,
    /// Training latents, noise and penalty interpolation.
    pub latent: u64,
    /// Evaluation latents and the embedder fit.
    pub eval: u64,
}

impl Seeds {
    pub const fn all(seed: u64) -> Self {
        Self { init: seed, data: seed.wrapping_add(1), latent: seed.wrapping_add(2), eval: seed.wrapping_add(3) }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbedderChoice {
    /// PCA-filter embedder fitted on the training corpus.
    #[default]
    Lite,
    Inception { weights: PathBuf },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

fn default_lambda() -> f64 {
    10.0
}
fn default_clip() -> f64 {
    0.01
}
fn default_base() -> usize {
    16
}
fn default_max() -> usize {
    128
}
fn default_fid_samples() -> usize {
    1000
}
fn default_log_every() -> usize {
    50
}
fn default_sample_images() -> usize {
    16
}
fn default_threshold() -> f64 {
    1e6
}
fn default_patience() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub image_size: ImageSize,
    pub learning_rate: f64,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    pub budget: Budget,
    pub eval_every_kimg: f64,
    pub seeds: Seeds,
    #[serde(default = "default_lambda")]
    pub gp_lambda: f64,
    #[serde(default = "default_clip")]
    pub clip_bound: f64,
    /// Critic updates per generator update; defaults to 5 for the
    /// Wasserstein models and 1 otherwise.
    #[serde(default)]
    pub n_critic: Option<usize>,
    #[serde(default)]
    pub latent_dim: Option<usize>,
    #[serde(default = "default_base")]
    pub base_channels: usize,
    #[serde(default = "default_max")]
    pub max_channels: usize,
    #[serde(default)]
    pub generator_loss: GeneratorLossKind,
    #[serde(default)]
    pub augmentation_probability: f64,
    #[serde(default = "default_fid_samples")]
    pub fid_samples: usize,
    #[serde(default)]
    pub embedder: EmbedderChoice,
    #[serde(default = "default_log_every")]
    pub log_every_steps: usize,
    #[serde(default = "default_sample_images")]
    pub sample_images: usize,
    #[serde(default = "default_threshold")]
    pub divergence_threshold: f64,
    #[serde(default = "default_patience")]
    pub divergence_patience: usize,
    /// Write 0 in the wall-clock column so reruns are byte-identical.
    #[serde(default)]
    pub deterministic_clock: bool,
    #[serde(default)]
    pub precision: Precision,
}

impl TrainConfig {
    /// Published hyperparameters per model family, with the given size.
    pub fn preset(kind: ModelKind, image_size: ImageSize) -> Self {
        let (lr, budget) = match kind {
            ModelKind::Cgan => (2e-4, Budget::Epochs(500.0)),
            ModelKind::Wgan => (1e-5, Budget::Epochs(500.0)),
            ModelKind::WganGp => (1e-4, Budget::Epochs(1000.0)),
            ModelKind::Stylegan2Lite => (2.5e-3, Budget::Kimg(3600.0)),
        };
        Self {
            model_kind: kind,
            image_size,
            learning_rate: lr,
            optimizer: OptimizerConfig::default_for(kind),
            batch_size: 60,
            budget,
            eval_every_kimg: 200.0,
            seeds: Seeds::all(0),
            gp_lambda: default_lambda(),
            clip_bound: default_clip(),
            n_critic: None,
            latent_dim: None,
            base_channels: default_base(),
            max_channels: default_max(),
            generator_loss: GeneratorLossKind::NonSaturating,
            augmentation_probability: 0.0,
            fid_samples: default_fid_samples(),
            embedder: EmbedderChoice::Lite,
            log_every_steps: default_log_every(),
            sample_images: default_sample_images(),
            divergence_threshold: default_threshold(),
            divergence_patience: default_patience(),
            deterministic_clock: false,
            precision: Precision::F32,
        }
    }

    pub fn n_critic(&self) -> usize {
        self.n_critic.unwrap_or(if self.model_kind.is_wasserstein() { 5 } else { 1 })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim.unwrap_or_else(|| self.model_kind.default_latent_dim())
    }

    /// Size the networks actually train at: the style generator works on
    /// a square power-of-two center crop (side nearest the shorter edge).
    pub fn effective_size(&self) -> ImageSize {
        if self.model_kind != ModelKind::Stylegan2Lite {
            return self.image_size;
        }
        let s = self.image_size.width.min(self.image_size.height).max(8);
        let lo = 1usize << (usize::BITS - 1 - s.leading_zeros());
        let side = if s - lo < 2 * lo - s { lo } else { 2 * lo };
        ImageSize::new(side, side)
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.budget.value().is_finite() && self.budget.value() > 0.0) {
            return bad(format!("budget must be positive, got {:?}", self.budget));
        }
        if !(self.eval_every_kimg.is_finite() && self.eval_every_kimg > 0.0) {
            return bad(format!("eval_every_kimg must be positive, got {}", self.eval_every_kimg));
        }
        match (self.model_kind, &self.optimizer) {
            (ModelKind::Wgan, OptimizerConfig::Rmsprop { .. }) => {}
            (ModelKind::Wgan, _) => return bad("wgan must use rmsprop".into()),
            (_, OptimizerConfig::Rmsprop { .. }) => return bad(format!("{} must use adam", self.model_kind)),
            _ => {}
        }
        match self.optimizer {
            OptimizerConfig::Adam { beta1, beta2 } if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2)) => {
                return bad(format!("adam betas ({beta1}, {beta2}) outside [0, 1)"));
            }
            OptimizerConfig::Rmsprop { alpha } if !(0.0..1.0).contains(&alpha) => {
                return bad(format!("rmsprop alpha {alpha} outside [0, 1)"));
            }
            _ => {}
        }
        if self.model_kind == ModelKind::WganGp && !(self.gp_lambda.is_finite() && self.gp_lambda > 0.0) {
            return bad(format!("gp_lambda must be positive, got {}", self.gp_lambda));
        }
        if self.model_kind == ModelKind::Wgan && !(self.clip_bound.is_finite() && self.clip_bound > 0.0) {
            return bad(format!("clip_bound must be positive, got {}", self.clip_bound));
        }
        if self.n_critic() == 0 {
            return bad("n_critic must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.augmentation_probability) {
            return bad(format!("augmentation_probability {} outside [0, 1]", self.augmentation_probability));
        }
        if self.fid_samples < 2 {
            return bad("fid_samples must be at least 2".into());
        }
        if self.log_every_steps == 0 || self.divergence_patience == 0 {
            return bad("log_every_steps and divergence_patience must be positive".into());
        }
        crate::ganzoo::ArchDescriptor::new(
            self.model_kind,
            self.effective_size(),
            self.latent_dim(),
            self.base_channels,
            self.max_channels,
        )
        .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, TrainError> {
        let c: Self = serde_json::from_str(s).map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for kind in ModelKind::ALL {
            let c = TrainConfig::preset(kind, ImageSize::new(320, 240));
            c.validate().unwrap();
            assert_eq!(TrainConfig::from_json(&c.to_json()).unwrap(), c);
        }
    }

    #[test]
    fn wgan_requires_rmsprop() {
        let mut c = TrainConfig::preset(ModelKind::Wgan, ImageSize::new(32, 32));
        c.optimizer = OptimizerConfig::Adam { beta1: 0.5, beta2: 0.9 };
        assert!(matches!(c.validate(), Err(TrainError::InvalidConfig(_))));
        let mut g = TrainConfig::preset(ModelKind::WganGp, ImageSize::new(32, 32));
        g.optimizer = OptimizerConfig::Rmsprop { alpha: 0.99 };
        assert!(g.validate().is_err());
    }

    #[test]
    fn rejects_bad_scalars() {
        let base = TrainConfig::preset(ModelKind::Cgan, ImageSize::new(32, 32));
        for f in [
            |c: &mut TrainConfig| c.learning_rate = 0.0,
            |c: &mut TrainConfig| c.learning_rate = f64::NAN,
            |c: &mut TrainConfig| c.batch_size = 0,
            |c: &mut TrainConfig| c.budget = Budget::Kimg(0.0),
            |c: &mut TrainConfig| c.budget = Budget::Epochs(-1.0),
            |c: &mut TrainConfig| c.n_critic = Some(0),
            |c: &mut TrainConfig| c.image_size = ImageSize::new(8, 8),
        ] {
            let mut c = base.clone();
            f(&mut c);
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn style_effective_size() {
        let c = |w, h| TrainConfig::preset(ModelKind::Stylegan2Lite, ImageSize::new(w, h)).effective_size();
        assert_eq!(c(320, 240), ImageSize::new(256, 256));
        assert_eq!(c(32, 32), ImageSize::new(32, 32));
        assert_eq!(c(80, 160), ImageSize::new(64, 64));
        assert_eq!(c(80, 60), ImageSize::new(64, 64));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let c = TrainConfig::preset(ModelKind::Cgan, ImageSize::new(32, 32));
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        v["learning_rat"] = serde_json::json!(1.0);
        assert!(TrainConfig::from_json(&v.to_string()).is_err());
    }
}
