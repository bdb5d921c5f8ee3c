use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GroundTruth, PadError, PadScore};
use crate::corpus::PixelTensor;

/// A presentation-attack detector. Scores lie in `[0, 1]`, higher meaning
/// more bona fide, and depend only on the model and the input.
pub trait PadClassifier {
    fn id(&self) -> String;
    fn score(&self, sample_id: &str, image: &PixelTensor) -> Result<f64, PadError>;
}

#[derive(Clone, Debug)]
pub struct LabeledImage {
    pub sample_id: String,
    pub ground_truth: GroundTruth,
    pub image: PixelTensor,
}

impl LabeledImage {
    pub fn new(sample_id: impl Into<String>, ground_truth: GroundTruth, image: PixelTensor) -> Self {
        Self { sample_id: sample_id.into(), ground_truth, image }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreFailure {
    pub sample_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    pub scores: Vec<PadScore>,
    pub failures: Vec<ScoreFailure>,
}

/// Scores every image in order. A failing sample is recorded and skipped.
pub fn score_set(clf: &dyn PadClassifier, images: &[LabeledImage]) -> ScoreSet {
    let mut out = ScoreSet::default();
    for item in images {
        let scored = clf
            .score(&item.sample_id, &item.image)
            .and_then(|s| PadScore::new(item.sample_id.clone(), item.ground_truth, s));
        match scored {
            Ok(s) => out.scores.push(s),
            Err(e) => out.failures.push(ScoreFailure { sample_id: item.sample_id.clone(), reason: e.to_string() }),
        }
    }
    out
}

/// Returns the same score for every input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstClassifier(pub f64);

impl PadClassifier for ConstClassifier {
    fn id(&self) -> String {
        format!("const:{}", self.0)
    }

    fn score(&self, _: &str, _: &PixelTensor) -> Result<f64, PadError> {
        Ok(self.0)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    sample_id: String,
    ground_truth: String,
    score: f64,
}

/// Reads a `sample_id,ground_truth,score` CSV.
pub fn read_score_file(path: &Path) -> Result<Vec<PadScore>, PadError> {
    let bad = |reason: String| PadError::ScoreFile { path: path.into(), reason };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["sample_id", "ground_truth", "score"] {
        return Err(bad(format!("expected header sample_id,ground_truth,score, found {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    rdr.deserialize::<ScoreRow>()
        .enumerate()
        .map(|(i, row)| {
            let row = row.map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
            PadScore::new(row.sample_id, row.ground_truth.parse()?, row.score)
        })
        .collect()
}

pub fn write_score_file(path: &Path, scores: &[PadScore]) -> Result<(), PadError> {
    let bad = |reason: String| PadError::ScoreFile { path: path.into(), reason };
    let mut w = csv::Writer::from_path(path).map_err(|e| bad(e.to_string()))?;
    for s in scores {
        w.serialize(ScoreRow { sample_id: s.sample_id.clone(), ground_truth: s.ground_truth.to_string(), score: s.score })
            .map_err(|e| bad(e.to_string()))?;
    }
    w.flush().map_err(|e| PadError::io(path, e))
}

/// Looks up externally produced scores by sample id.
#[derive(Clone, Debug)]
pub struct FileClassifier {
    path: PathBuf,
    scores: HashMap<String, f64>,
}

impl FileClassifier {
    pub fn from_file(path: &Path) -> Result<Self, PadError> {
        let scores = read_score_file(path)?.into_iter().map(|s| (s.sample_id, s.score)).collect();
        Ok(Self { path: path.into(), scores })
    }
}

impl PadClassifier for FileClassifier {
    fn id(&self) -> String {
        format!("file:{}", self.path.display())
    }

    fn score(&self, sample_id: &str, _: &PixelTensor) -> Result<f64, PadError> {
        self.scores.get(sample_id).copied().ok_or_else(|| PadError::UnknownSample(sample_id.into()))
    }
}
