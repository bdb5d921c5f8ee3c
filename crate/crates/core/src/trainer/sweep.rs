use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use spai_autograd::Scalar;

use super::{train_dataset, RunLog, TrainConfig, TrainError, TrainOptions};
use crate::corpus::Dataset;
use crate::quality::EmbeddingModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    LearningRate,
    BatchSize,
    NCritic,
    GpLambda,
    ClipBound,
}

impl SweepAxis {
    pub fn apply(self, base: &TrainConfig, value: f64) -> TrainConfig {
        let mut c = base.clone();
        match self {
            Self::LearningRate => c.learning_rate = value,
            Self::BatchSize => c.batch_size = value as usize,
            Self::NCritic => c.n_critic = Some(value as usize),
            Self::GpLambda => c.gp_lambda = value,
            Self::ClipBound => c.clip_bound = value,
        }
        c
    }
}

impl std::fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).expect("axis serializes");
        f.write_str(s.as_str().unwrap_or_default())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sweep {
    pub base: TrainConfig,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug)]
pub struct SweepRun {
    pub value: f64,
    /// A failed run keeps its error message; the other runs go on.
    pub outcome: Result<RunLog, String>,
}

/// Runs one training per value, in order. Run `i` writes into
/// `root/run_{i:03}` when a root is given.
pub fn hyperparameter_sweep<T: Scalar>(
    sweep: &Sweep,
    dataset: &Dataset,
    embedder: Option<&dyn EmbeddingModel>,
    root: Option<&Path>,
) -> Vec<SweepRun> {
    sweep
        .values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let config = sweep.axis.apply(&sweep.base, value);
            let opts = TrainOptions { run_dir: root.map(|r| r.join(format!("run_{i:03}"))), observer: None, embedder };
            let outcome = match train_dataset::<T>(&config, dataset, opts) {
                Ok(o) => Ok(o.log),
                Err(TrainError::Diverged { step, reason, .. }) => Err(format!("diverged at step {step}: {reason}")),
                Err(e) => Err(e.to_string()),
            };
            if let Err(e) = &outcome {
                log::warn!("sweep {}={value}: {e}", sweep.axis);
            }
            SweepRun { value, outcome }
        })
        .collect()
}

/// Long-format CSV `axis_value,kimg,fid` over every successful run.
pub fn merged_fid_curve(axis: SweepAxis, runs: &[SweepRun]) -> String {
    let mut out = format!("{axis},kimg,fid\n");
    for r in runs {
        if let Ok(log) = &r.outcome {
            for (kimg, fid) in log.fid_curve() {
                writeln!(out, "{},{kimg:.3},{fid:.4}", r.value).expect("string write");
            }
        }
    }
    out
}
