//! Named presets for the four generator experiments and the unknown-attack
//! protocol.

use clap::ValueEnum;
use spai_core::ganzoo::{ImageSize, ModelKind};
use spai_core::quality::TsneConfig;
use spai_core::trainer::{Budget, EmbedderChoice, TrainConfig};

use crate::config::{CorpusSpec, PadSpec, QualitySpec, RunConfig, RUN_CONFIG_SCHEMA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Recipe {
    #[value(name = "exp1-cgan-80x160")]
    Exp1Cgan80x160,
    #[value(name = "exp1-cgan-320x240")]
    Exp1Cgan320x240,
    #[value(name = "exp2-wgan")]
    Exp2Wgan,
    #[value(name = "exp3-wgangp")]
    Exp3Wgangp,
    #[value(name = "exp4-stylegan2")]
    Exp4Stylegan2,
    #[value(name = "unknown-attack")]
    UnknownAttack,
}

/// Probability of each augmentation transform firing.
const AUGMENTATION_P: f64 = 0.75;

impl Recipe {
    pub fn name(self) -> &'static str {
        match self {
            Recipe::Exp1Cgan80x160 => "exp1-cgan-80x160",
            Recipe::Exp1Cgan320x240 => "exp1-cgan-320x240",
            Recipe::Exp2Wgan => "exp2-wgan",
            Recipe::Exp3Wgangp => "exp3-wgangp",
            Recipe::Exp4Stylegan2 => "exp4-stylegan2",
            Recipe::UnknownAttack => "unknown-attack",
        }
    }

    fn model(self) -> (ModelKind, ImageSize) {
        match self {
            Recipe::Exp1Cgan80x160 => (ModelKind::Cgan, ImageSize::new(80, 160)),
            Recipe::Exp1Cgan320x240 => (ModelKind::Cgan, ImageSize::new(320, 240)),
            Recipe::Exp2Wgan => (ModelKind::Wgan, ImageSize::new(320, 240)),
            Recipe::Exp3Wgangp => (ModelKind::WganGp, ImageSize::new(320, 240)),
            Recipe::Exp4Stylegan2 | Recipe::UnknownAttack => (ModelKind::Stylegan2Lite, ImageSize::new(320, 240)),
        }
    }

    pub fn config(self) -> RunConfig {
        let (kind, size) = self.model();
        let mut train = TrainConfig::preset(kind, size);
        train.augmentation_probability = AUGMENTATION_P;
        if kind == ModelKind::Stylegan2Lite {
            train.budget = Budget::Kimg(3600.0);
            train.eval_every_kimg = 200.0;
        }
        RunConfig {
            schema_version: RUN_CONFIG_SCHEMA,
            name: self.name().to_string(),
            workspace: ".".into(),
            corpus: CorpusSpec { dir: None, manifest: None, labeling: None },
            quality: QualitySpec {
                embedder: EmbedderChoice::Lite,
                fid_samples: train.fid_samples,
                tsne: TsneConfig::default(),
            },
            train,
            pad: PadSpec { classifier: "baseline".into(), threshold: 0.5, n_synthetic: 3000, generation_seed: 0 },
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use spai_core::trainer::OptimizerConfig;

    #[test]
    fn names_match_the_command_line() {
        for r in Recipe::value_variants() {
            assert_eq!(r.to_possible_value().unwrap().get_name(), r.name());
        }
    }

    #[test]
    fn stated_hyperparameters() {
        let w = Recipe::Exp2Wgan.config().train;
        assert_eq!((w.learning_rate, w.batch_size, w.budget), (1e-5, 60, Budget::Epochs(500.0)));
        assert!(matches!(w.optimizer, OptimizerConfig::Rmsprop { .. }));
        let gp = Recipe::Exp3Wgangp.config().train;
        assert_eq!((gp.learning_rate, gp.batch_size, gp.budget), (1e-4, 60, Budget::Epochs(1000.0)));
        assert!(matches!(gp.optimizer, OptimizerConfig::Adam { .. }));
        let s = Recipe::Exp4Stylegan2.config().train;
        assert_eq!((s.learning_rate, s.batch_size, s.budget, s.eval_every_kimg), (2.5e-3, 60, Budget::Kimg(3600.0), 200.0));
        let c = Recipe::Exp1Cgan320x240.config().train;
        assert_eq!((c.image_size, c.budget), (ImageSize::new(320, 240), Budget::Epochs(500.0)));
        assert_eq!(Recipe::Exp1Cgan80x160.config().train.image_size, ImageSize::new(80, 160));
        assert_eq!(Recipe::UnknownAttack.config().pad.n_synthetic, 3000);
        for r in Recipe::value_variants() {
            let cfg = r.config();
            cfg.validate().unwrap();
            assert_eq!(cfg.train.augmentation_probability, 0.75);
        }
    }
}
