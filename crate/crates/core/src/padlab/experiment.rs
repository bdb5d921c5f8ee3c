use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    d_eer, det_curve, iso_metrics, score_set, write_score_file, DetCurve, EqualErrorPoint, GroundTruth, IsoMetricsReport,
    LabeledImage, PadClassifier, PadError, PadScore, ScoreFailure,
};

pub const TIE_RULE: &str = "score >= threshold is a bona fide decision";

/// Everything measured when synthetic images are shown to a detector that
/// never saw them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub classifier_id: String,
    pub tie_rule: String,
    pub threshold: f64,
    pub n_pai: usize,
    pub n_bonafide: usize,
    pub scores: Vec<PadScore>,
    pub failures: Vec<ScoreFailure>,
    pub metrics: IsoMetricsReport,
    pub det: DetCurve,
    pub d_eer: EqualErrorPoint,
    pub metrics_at_eer: IsoMetricsReport,
    /// Share of scored PAI images accepted as bona fide at `threshold`.
    pub fraction_pai_bonafide: f64,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `report.json`, `det.csv` and `scores.csv`.
    pub fn write(&self, dir: &Path) -> Result<(), PadError> {
        std::fs::create_dir_all(dir).map_err(|e| PadError::io(dir, e))?;
        let report = dir.join("report.json");
        std::fs::write(&report, self.to_json()).map_err(|e| PadError::io(&report, e))?;
        let det = dir.join("det.csv");
        std::fs::write(&det, self.det.to_csv()).map_err(|e| PadError::io(&det, e))?;
        write_score_file(&dir.join("scores.csv"), &self.scores)
    }
}

/// Images are relabeled by set membership: `pai` as attacks, `bonafide` as
/// bona fide.
pub fn unknown_attack_experiment(
    pai: &[LabeledImage],
    bonafide: &[LabeledImage],
    clf: &dyn PadClassifier,
    threshold: f64,
) -> Result<ExperimentReport, PadError> {
    if pai.is_empty() {
        return Err(PadError::MissingClass(GroundTruth::Attack));
    }
    if bonafide.is_empty() {
        return Err(PadError::MissingClass(GroundTruth::Bonafide));
    }
    let all: Vec<LabeledImage> = pai
        .iter()
        .map(|i| LabeledImage { ground_truth: GroundTruth::Attack, ..i.clone() })
        .chain(bonafide.iter().map(|i| LabeledImage { ground_truth: GroundTruth::Bonafide, ..i.clone() }))
        .collect();
    let set = score_set(clf, &all);
    let metrics = iso_metrics(&set.scores, threshold)?;
    let det = det_curve(&set.scores)?;
    let eer = d_eer(&det);
    let metrics_at_eer = iso_metrics(&set.scores, eer.threshold)?;
    let pai_scores: Vec<f64> =
        set.scores.iter().filter(|s| s.ground_truth == GroundTruth::Attack).map(|s| s.score).collect();
    let accepted = pai_scores.iter().filter(|&&s| s >= threshold).count();
    Ok(ExperimentReport {
        classifier_id: clf.id(),
        tie_rule: TIE_RULE.into(),
        threshold,
        n_pai: pai.len(),
        n_bonafide: bonafide.len(),
        fraction_pai_bonafide: accepted as f64 / pai_scores.len() as f64,
        scores: set.scores,
        failures: set.failures,
        metrics,
        det,
        d_eer: eer,
        metrics_at_eer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PixelTensor;
    use crate::padlab::ConstClassifier;

    fn items(n: usize, gt: GroundTruth) -> Vec<LabeledImage> {
        (0..n).map(|i| LabeledImage::new(format!("{gt}{i}"), gt, PixelTensor::constant(4, 4, 0.0))).collect()
    }

    #[test]
    fn constant_bonafide_scores_fool_everything() {
        let r = unknown_attack_experiment(&items(5, GroundTruth::Attack), &items(5, GroundTruth::Bonafide), &ConstClassifier(1.0), 0.5)
            .unwrap();
        assert_eq!(r.fraction_pai_bonafide, 1.0);
        assert_eq!(r.metrics.apcer, 1.0);
        assert_eq!(r.metrics.bpcer, 0.0);
        assert_eq!(r.scores.len(), 10);
    }

    #[test]
    fn empty_sets_are_rejected() {
        let clf = ConstClassifier(0.3);
        assert!(matches!(
            unknown_attack_experiment(&[], &items(2, GroundTruth::Bonafide), &clf, 0.5),
            Err(PadError::MissingClass(GroundTruth::Attack))
        ));
        assert!(matches!(
            unknown_attack_experiment(&items(2, GroundTruth::Attack), &[], &clf, 0.5),
            Err(PadError::MissingClass(GroundTruth::Bonafide))
        ));
    }

    #[test]
    fn report_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let r = unknown_attack_experiment(&items(3, GroundTruth::Attack), &items(2, GroundTruth::Bonafide), &ConstClassifier(0.7), 0.5)
            .unwrap();
        r.write(dir.path()).unwrap();
        let back: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(dir.path().join("det.csv").exists());
    }
}
