use std::path::Path;

use serde_json::json;
use spai_core::corpus::PixelTensor;
use spai_core::quality::{fid as fid_of, sharpness as sharpness_of, silhouette, tsne_project, EmbeddingModel, TsneConfig};
use spai_core::quality::{InceptionV3, LiteEmbedder, LiteEmbedderConfig};
use spai_core::trainer::EmbedderChoice;

use super::embedder_choice;
use crate::args::{FidArgs, SharpnessArgs, TsneArgs};
use crate::io::{fresh_file, load_image_set, usage, write_json, write_text, ReportMeta};

fn images_of(path: &Path) -> anyhow::Result<Vec<(String, PixelTensor)>> {
    let set = load_image_set(path)?;
    if set.is_empty() {
        return Err(usage(format!("no images in {}", path.display())));
    }
    Ok(set)
}

fn embedder(choice: &EmbedderChoice, fit_on: &[PixelTensor], seed: u64) -> anyhow::Result<Box<dyn EmbeddingModel>> {
    Ok(match choice {
        EmbedderChoice::Lite => Box::new(LiteEmbedder::fit(fit_on, LiteEmbedderConfig { seed, ..Default::default() })?),
        EmbedderChoice::Inception { weights } => Box::new(InceptionV3::from_safetensors(weights)?),
    })
}

pub fn fid(a: FidArgs) -> anyhow::Result<()> {
    let choice = embedder_choice(&a.embedder)?;
    if let Some(out) = &a.out {
        fresh_file(out, a.force)?;
    }
    let set_a: Vec<PixelTensor> = images_of(&a.a)?.into_iter().map(|(_, i)| i).collect();
    let set_b: Vec<PixelTensor> = images_of(&a.b)?.into_iter().map(|(_, i)| i).collect();
    // The lite embedder is fitted on the reference set.
    let model = embedder(&choice, &set_a, a.seed)?;
    let report = fid_of(&set_a, &set_b, model.as_ref())?;
    println!("FID {:.6} ({} vs {} images, {})", report.fid, report.n_a, report.n_b, report.embedder_id);
    if report.small_sample_bias {
        println!("warning: fewer than 2048 samples per set; the estimate is biased upward");
    }
    if let Some(out) = &a.out {
        let meta = ReportMeta::new("fid", json!({"a": a.a, "b": a.b, "embedder": choice}), &[("embedder_fit", a.seed)]);
        write_json(out, &json!({"meta": meta, "report": report}))?;
    }
    Ok(())
}

pub fn sharpness(a: SharpnessArgs) -> anyhow::Result<()> {
    if let Some(out) = &a.out {
        fresh_file(out, a.force)?;
    }
    let set = images_of(&a.dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "sharpness"])?;
    let mut total = 0.0;
    for (id, img) in &set {
        let s = sharpness_of(img);
        total += s;
        w.write_record([id.clone(), s.to_string()])?;
    }
    let text = String::from_utf8(w.into_inner()?)?;
    let mean = total / set.len() as f64;
    match &a.out {
        Some(out) => {
            write_text(out, &text)?;
            println!("mean sharpness {mean:.6} over {} images -> {}", set.len(), out.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn tsne(a: TsneArgs) -> anyhow::Result<()> {
    let summary = a.out.with_extension("json");
    fresh_file(&a.out, a.force)?;
    fresh_file(&summary, a.force)?;
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for (name, path) in &a.sets {
        let set = images_of(path)?;
        let take = a.max_per_set.unwrap_or(set.len());
        for (_, img) in set.into_iter().take(take) {
            images.push(img);
            labels.push(name.clone());
        }
    }
    let model = LiteEmbedder::fit(&images, LiteEmbedderConfig { seed: a.seed, ..Default::default() })?;
    let features = model.embed(&images)?;
    let rows: Vec<Vec<f64>> = features.row_iter().map(|r| r.iter().copied().collect()).collect();
    let cfg = TsneConfig { perplexity: a.perplexity, iterations: a.iterations, seed: a.seed, ..Default::default() };
    let map = tsne_project(&rows, &labels, &cfg)?;
    let sil = silhouette(&map.points, &map.labels);
    write_text(&a.out, &map.to_csv())?;
    let sets: Vec<_> = a.sets.iter().map(|(n, p)| json!({"name": n, "path": p})).collect();
    let meta = ReportMeta::new(
        "tsne",
        json!({"sets": sets, "max_per_set": a.max_per_set, "tsne": cfg, "embedder": model.id()}),
        &[("tsne", a.seed), ("embedder_fit", a.seed)],
    );
    write_json(
        &summary,
        &json!({"meta": meta, "n": map.points.len(), "silhouette": sil, "final_kl": map.final_kl(), "kl_history": map.kl_history}),
    )?;
    println!("{} points, silhouette {sil:.4} -> {}", map.points.len(), a.out.display());
    Ok(())
}
