use std::collections::HashSet;
use std::path::Path;

use anyhow::bail;
use serde::{Deserialize, Serialize};
use serde_json::json;
use spai_core::corpus::PixelTensor;
use spai_core::ganzoo::ModelKind;
use spai_core::padlab::{
    unknown_attack_experiment, BaselineCnn, BaselineConfig, ConstClassifier, FileClassifier, GroundTruth, LabeledImage,
    PadClassifier,
};

use crate::args::AttackArgs;
use crate::config::ClassifierId;
use crate::io::{fresh_dir, load_image_set, usage, write_json, ReportMeta};

/// Sidecar of an attack report, read back by `report`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackMeta {
    pub meta: ReportMeta,
    pub model_kind: Option<ModelKind>,
    pub classifier_id: String,
    pub threshold: f64,
}

fn labeled(path: &Path, truth: GroundTruth) -> anyhow::Result<Vec<LabeledImage>> {
    let set = load_image_set(path)?;
    if set.is_empty() {
        return Err(usage(format!("no images in {}", path.display())));
    }
    Ok(set.into_iter().map(|(id, img)| LabeledImage::new(id, truth, img)).collect())
}

pub fn run(a: AttackArgs) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(usage(format!("threshold {} outside [0, 1]", a.threshold)));
    }
    let id: ClassifierId = a.clf.parse().map_err(|e: anyhow::Error| usage(format!("{e:#}")))?;
    if matches!(id, ClassifierId::Baseline(None)) && a.baseline_train.is_none() {
        return Err(usage("--clf baseline needs --baseline-train or an archive (baseline:<path>)"));
    }
    let pai = labeled(&a.pai, GroundTruth::Attack)?;
    let bonafide = labeled(&a.bonafide, GroundTruth::Bonafide)?;
    let mut seen = HashSet::new();
    if let Some(dup) = pai.iter().chain(&bonafide).find(|s| !seen.insert(s.sample_id.as_str())) {
        bail!("sample id {:?} occurs more than once across --pai and --bonafide", dup.sample_id);
    }
    fresh_dir(&a.out, a.force)?;

    let clf: Box<dyn PadClassifier> = match &id {
        ClassifierId::Const(v) => Box::new(ConstClassifier(*v)),
        ClassifierId::File(p) => Box::new(FileClassifier::from_file(p)?),
        ClassifierId::Baseline(Some(p)) => Box::new(BaselineCnn::<f32>::load(p)?),
        ClassifierId::Baseline(None) => {
            let train_dir = a.baseline_train.as_ref().expect("checked above");
            let train: Vec<PixelTensor> = load_image_set(train_dir)?.into_iter().map(|(_, i)| i).collect();
            let model = BaselineCnn::<f32>::train(&train, BaselineConfig { seed: a.seed, ..Default::default() })?;
            let archive = a.out.join("baseline.bin");
            model.save(&archive)?;
            log::info!("baseline trained on {} images -> {}", train.len(), archive.display());
            Box::new(model)
        }
    };
    let report = unknown_attack_experiment(&pai, &bonafide, clf.as_ref(), a.threshold)?;
    report.write(&a.out)?;
    let meta = ReportMeta::new(
        "attack",
        json!({
            "pai": a.pai,
            "bonafide": a.bonafide,
            "classifier": a.clf,
            "baseline_train": a.baseline_train,
            "threshold": a.threshold,
        }),
        &[("baseline", a.seed)],
    );
    write_json(
        &a.out.join("meta.json"),
        &AttackMeta { meta, model_kind: a.model_kind, classifier_id: report.classifier_id.clone(), threshold: a.threshold },
    )?;
    let m = &report.metrics;
    println!(
        "APCER {:.4}  BPCER {:.4}  ACER {:.4}  D-EER {:.4} (threshold {})  PAI accepted as bona fide {:.4}",
        m.apcer, m.bpcer, m.acer, report.d_eer.eer, report.d_eer.threshold, report.fraction_pai_bonafide
    );
    if !report.failures.is_empty() {
        println!("{} samples could not be scored; see report.json", report.failures.len());
    }
    Ok(())
}
