//! Versioned run configuration.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spai_core::quality::TsneConfig;
use spai_core::trainer::{EmbedderChoice, Seeds, TrainConfig};

pub const RUN_CONFIG_SCHEMA: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    /// Directory ingested with `labeling` when no manifest is given.
    pub dir: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub labeling: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QualitySpec {
    /// Copied into the training config.
    pub embedder: EmbedderChoice,
    /// Copied into the training config.
    pub fid_samples: usize,
    pub tsne: TsneConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PadSpec {
    /// `baseline[:archive]`, `file:scores.csv` or `const:value`.
    pub classifier: String,
    pub threshold: f64,
    /// Synthetic images drawn for the unknown-attack set.
    pub n_synthetic: u64,
    pub generation_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub name: String,
    /// Root for run directories; `SPAI_WORKSPACE` overrides it.
    pub workspace: PathBuf,
    pub corpus: CorpusSpec,
    pub train: TrainConfig,
    pub quality: QualitySpec,
    pub pad: PadSpec,
    /// Expanded into the four training seeds.
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != RUN_CONFIG_SCHEMA {
            bail!("unsupported schema_version {} (expected {RUN_CONFIG_SCHEMA})", self.schema_version);
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            bail!("name must be a non-empty single path component, got {:?}", self.name);
        }
        self.resolved_train().validate()?;
        if !(0.0..=1.0).contains(&self.pad.threshold) {
            bail!("pad threshold {} outside [0, 1]", self.pad.threshold);
        }
        ClassifierId::from_str(&self.pad.classifier)?;
        if self.pad.n_synthetic == 0 {
            bail!("pad n_synthetic must be positive");
        }
        let t = &self.quality.tsne;
        if !(t.perplexity > 0.0 && t.learning_rate > 0.0 && t.iterations > 0) {
            bail!("tsne perplexity, learning_rate and iterations must be positive");
        }
        Ok(())
    }

    /// Training config with the run-wide seed and quality settings applied.
    pub fn resolved_train(&self) -> TrainConfig {
        let mut t = self.train.clone();
        t.seeds = Seeds::all(self.seed);
        t.embedder = self.quality.embedder.clone();
        t.fid_samples = self.quality.fid_samples;
        t
    }

    pub fn workspace(&self) -> PathBuf {
        std::env::var_os("SPAI_WORKSPACE").map(PathBuf::from).unwrap_or_else(|| self.workspace.clone())
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn from_json(s: &str) -> anyhow::Result<Self> {
        let c: Self = serde_json::from_str(s).context("run config does not match the schema")?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let s = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&s).with_context(|| format!("in {}", path.display()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClassifierId {
    /// Bundled CNN, loaded from an archive or trained on the fly.
    Baseline(Option<PathBuf>),
    File(PathBuf),
    Const(f64),
}

impl FromStr for ClassifierId {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        let (kind, rest) = s.split_once(':').map_or((s, None), |(k, r)| (k, Some(r)));
        Ok(match (kind, rest) {
            ("baseline", None) => Self::Baseline(None),
            ("baseline", Some(p)) if !p.is_empty() => Self::Baseline(Some(p.into())),
            ("file", Some(p)) if !p.is_empty() => Self::File(p.into()),
            ("const", Some(v)) => {
                let v: f64 = v.parse().with_context(|| format!("bad constant score {v:?}"))?;
                if !(0.0..=1.0).contains(&v) {
                    bail!("constant score {v} outside [0, 1]");
                }
                Self::Const(v)
            }
            _ => bail!("unknown classifier id {s:?}; use baseline[:path], file:path or const:value"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recipes::Recipe;

    #[test]
    fn unknown_keys_and_versions_are_rejected() {
        let c = Recipe::Exp3Wgangp.config();
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        v["extra"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        v["train"]["learnign_rate"] = serde_json::json!(1);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        v["schema_version"] = serde_json::json!(2);
        assert!(RunConfig::from_json(&v.to_string()).is_err());
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn classifier_ids() {
        assert_eq!("baseline".parse::<ClassifierId>().unwrap(), ClassifierId::Baseline(None));
        assert_eq!("file:a.csv".parse::<ClassifierId>().unwrap(), ClassifierId::File("a.csv".into()));
        assert_eq!("const:1".parse::<ClassifierId>().unwrap(), ClassifierId::Const(1.0));
        for bad in ["const:2", "file:", "usach", "const:x"] {
            assert!(bad.parse::<ClassifierId>().is_err(), "{bad}");
        }
    }

    #[test]
    fn seed_expands_into_training_seeds() {
        let mut c = Recipe::Exp2Wgan.config();
        c.seed = 41;
        assert_eq!(c.resolved_train().seeds, Seeds::all(41));
    }
}
