use std::path::PathBuf;

use anyhow::Context;
use spai_core::corpus::{ingest_directory, LabelingRules, Manifest};
use spai_core::ganzoo::ImageSize;
use spai_core::trainer::{train, Budget, Precision, RunLog};

use super::embedder_choice;
use crate::args::TrainArgs;
use crate::config::RunConfig;
use crate::io::{fresh_dir, usage, write_text};

fn apply_overrides(cfg: &mut RunConfig, a: &TrainArgs) -> anyhow::Result<()> {
    let t = &mut cfg.train;
    if let Some(k) = a.budget_kimg {
        t.budget = Budget::Kimg(k);
    }
    if let Some(e) = a.budget_epochs {
        t.budget = Budget::Epochs(e);
    }
    if let Some((w, h)) = a.image_size {
        t.image_size = ImageSize::new(w, h);
    }
    macro_rules! set {
        ($($field:ident <- $arg:ident),*) => {$(if let Some(v) = a.$arg { t.$field = v; })*};
    }
    set!(batch_size <- batch_size, learning_rate <- learning_rate, eval_every_kimg <- eval_every_kimg,
         base_channels <- base_channels, max_channels <- max_channels, augmentation_probability <- augmentation_p);
    if a.deterministic {
        t.deterministic_clock = true;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(n) = a.fid_samples {
        cfg.quality.fid_samples = n;
    }
    if let Some(e) = &a.embedder {
        cfg.quality.embedder = embedder_choice(e)?;
    }
    Ok(())
}

fn resolve_manifest(cfg: &RunConfig, a: &TrainArgs) -> anyhow::Result<Manifest> {
    let ingest = |dir: &PathBuf, labeling: Option<&PathBuf>| -> anyhow::Result<Manifest> {
        let rules = match labeling {
            Some(p) => LabelingRules::load(p).with_context(|| format!("labeling rules {}", p.display()))?,
            None => LabelingRules::default(),
        };
        let report = ingest_directory(dir, &rules)?;
        for f in &report.failures {
            log::warn!("skipped {}: {}", f.path.display(), f.reason);
        }
        Ok(report.manifest)
    };
    if let Some(m) = &a.manifest {
        return Manifest::load(m).with_context(|| format!("loading {}", m.display()));
    }
    if let Some(d) = &a.corpus {
        return ingest(d, a.labeling.as_ref());
    }
    if let Some(m) = &cfg.corpus.manifest {
        return Manifest::load(m).with_context(|| format!("loading {}", m.display()));
    }
    if let Some(d) = &cfg.corpus.dir {
        return ingest(d, cfg.corpus.labeling.as_ref());
    }
    Err(usage("no training corpus: pass --manifest or --corpus, or set corpus in the config"))
}

pub fn run(a: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = match (&a.recipe, &a.config) {
        (Some(r), None) => r.config(),
        (None, Some(p)) => RunConfig::load(p)?,
        _ => return Err(usage("exactly one of --recipe and --config is required")),
    };
    apply_overrides(&mut cfg, &a)?;
    cfg.validate()?;
    if a.dry_run {
        print!("{}", cfg.to_json());
        return Ok(());
    }
    let manifest = resolve_manifest(&cfg, &a)?;
    let run_dir = a.run_dir.clone().unwrap_or_else(|| cfg.workspace().join("runs").join(&cfg.name));
    fresh_dir(&run_dir, a.force)?;
    write_text(&run_dir.join("run_config.json"), &cfg.to_json())?;
    manifest.save(&run_dir.join("manifest.json"))?;

    let tc = cfg.resolved_train();
    log::info!("run config {}", cfg.hash());
    log::info!("training {} on {} images into {}", tc.model_kind, manifest.len(), run_dir.display());
    let log: RunLog = match tc.precision {
        Precision::F32 => train::<f32>(&tc, &manifest, Some(&run_dir))?.log,
        Precision::F64 => train::<f64>(&tc, &manifest, Some(&run_dir))?.log,
    };
    let steps = log.rows.last().map_or(0, |r| r.step);
    match &log.best {
        Some(b) => println!(
            "{}: {steps} steps, best FID {:.4} at {:.3} kimg ({}) -> {}",
            tc.model_kind,
            b.fid,
            b.kimg,
            b.checkpoint.as_deref().unwrap_or("-"),
            run_dir.display()
        ),
        None => println!("{}: {steps} steps -> {}", tc.model_kind, run_dir.display()),
    }
    for n in &log.notes {
        println!("note: {n}");
    }
    Ok(())
}
