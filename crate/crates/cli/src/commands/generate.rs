use std::path::PathBuf;

use anyhow::Context;
use serde_json::json;
use spai_core::trainer::{generate, write_generated, Checkpoint, GeneratedImage, RunLog};

use crate::args::GenerateArgs;
use crate::io::{fresh_dir, usage, write_json, ReportMeta};

fn resolve(a: &GenerateArgs) -> anyhow::Result<PathBuf> {
    if a.ckpt != "best" {
        return Ok(PathBuf::from(&a.ckpt));
    }
    let dir = a.run_dir.as_ref().ok_or_else(|| usage("--ckpt best needs --run-dir"))?;
    let log = RunLog::load(dir).with_context(|| format!("reading run log in {}", dir.display()))?;
    let best = log.best.and_then(|b| b.checkpoint).with_context(|| format!("{} has no saved checkpoint", dir.display()))?;
    Ok(dir.join(best))
}

pub fn run(a: GenerateArgs) -> anyhow::Result<()> {
    if a.n == 0 {
        return Err(usage("--n must be positive"));
    }
    let path = resolve(&a)?;
    let label = a.label.map(Into::into);
    let (images, digest, config_hash): (Vec<GeneratedImage>, _, _) = if Checkpoint::<f32>::stored_dtype(&path)? == "f64" {
        let c = Checkpoint::<f64>::load(&path)?;
        (generate(&c, a.n, a.seed, label)?, c.digest.clone(), c.meta.config_hash.clone())
    } else {
        let c = Checkpoint::<f32>::load(&path)?;
        (generate(&c, a.n, a.seed, label)?, c.digest.clone(), c.meta.config_hash.clone())
    };
    fresh_dir(&a.out, a.force)?;
    write_generated(&a.out, &images)?;
    let meta = ReportMeta::new(
        "generate",
        json!({
            "checkpoint": path,
            "checkpoint_digest": digest,
            "training_config_hash": config_hash,
            "n": a.n,
            "label": label,
        }),
        &[("generation", a.seed)],
    );
    write_json(&a.out.join("generate.json"), &meta)?;
    println!("{} images -> {}", images.len(), a.out.display());
    Ok(())
}
