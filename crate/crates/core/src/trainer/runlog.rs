use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{TrainConfig, TrainError};

pub const RUNLOG_HEADER: &str = "kimg,loss_d,loss_g,fid,wall_s";

/// One log row; `kimg = images_seen / 1000` counts images shown to the
/// critic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub images_seen: u64,
    pub kimg: f64,
    pub epoch: f64,
    pub loss_d: Option<f64>,
    pub loss_g: Option<f64>,
    pub fid: Option<f64>,
    pub wall_s: f64,
    pub checkpoint: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestCheckpoint {
    pub kimg: f64,
    pub fid: f64,
    pub checkpoint: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Completed,
    Diverged { step: u64, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: TrainConfig,
    pub config_hash: String,
    pub embedder_id: String,
    pub dataset_size: usize,
    pub total_steps: u64,
    pub notes: Vec<String>,
    pub rows: Vec<LogRow>,
    pub best: Option<BestCheckpoint>,
    pub status: RunStatus,
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map(|x| format!("{x:.prec$}")).unwrap_or_default()
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(RUNLOG_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.3},{},{},{},{:.3}",
                r.kimg,
                opt(r.loss_d, 6),
                opt(r.loss_g, 6),
                opt(r.fid, 4),
                r.wall_s
            );
        }
        s
    }

    /// `(kimg, fid)` at every evaluation.
    pub fn fid_curve(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| r.fid.map(|f| (r.kimg, f))).collect()
    }

    pub fn last_row(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    /// Writes `runlog.csv` and `runlog.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), TrainError> {
        let csv = dir.join("runlog.csv");
        std::fs::write(&csv, self.to_csv()).map_err(|e| TrainError::io(&csv, e))?;
        let json = dir.join("runlog.json");
        let body = serde_json::to_string_pretty(self).expect("runlog serializes");
        std::fs::write(&json, body).map_err(|e| TrainError::io(&json, e))
    }

    pub fn load(dir: &Path) -> Result<Self, TrainError> {
        let path = dir.join("runlog.json");
        let s = std::fs::read_to_string(&path).map_err(|e| TrainError::io(&path, e))?;
        serde_json::from_str(&s).map_err(|e| TrainError::Checkpoint(format!("{}: {e}", path.display())))
    }

    /// Parses the `kimg,...` CSV back into `(kimg, loss_d, loss_g, fid, wall_s)`.
    pub fn parse_csv(text: &str) -> Result<Vec<[Option<f64>; 5]>, TrainError> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let mut out = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| TrainError::Checkpoint(e.to_string()))?;
            let mut row = [None; 5];
            for (i, f) in rec.iter().enumerate().take(5) {
                if !f.is_empty() {
                    row[i] = Some(f.parse().map_err(|e| TrainError::Checkpoint(format!("{f}: {e}")))?);
                }
            }
            out.push(row);
        }
        Ok(out)
    }
}
