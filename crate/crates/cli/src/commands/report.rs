use std::cmp::Ordering;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use spai_core::padlab::{reference, ExperimentReport};
use spai_core::trainer::{RunLog, RunStatus};
use walkdir::WalkDir;

use super::attack::AttackMeta;
use crate::args::ReportArgs;
use crate::io::{fresh_dir, write_json, write_text};

#[derive(Debug, Serialize)]
struct FidRow {
    rank: usize,
    run: String,
    model_kind: String,
    image_size: String,
    status: String,
    best_fid: Option<f64>,
    best_kimg: Option<f64>,
    final_fid: Option<f64>,
    embedder_id: String,
    dataset_size: usize,
    config_hash: String,
    reference_best_fid: f64,
}

#[derive(Debug, Serialize)]
struct DeerRow {
    rank: usize,
    run: String,
    model_kind: Option<String>,
    classifier_id: String,
    threshold: f64,
    apcer: f64,
    bpcer: f64,
    acer: f64,
    d_eer: f64,
    d_eer_threshold: f64,
    fraction_pai_bonafide: f64,
    reference_d_eer_percent: Option<f64>,
}

fn rel(root: &Path, dir: &Path) -> String {
    let r = dir.strip_prefix(root).unwrap_or(dir);
    if r.as_os_str().is_empty() {
        ".".into()
    } else {
        r.display().to_string()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The `kimg` and `fid` columns of an evaluated run log, copied as written.
fn fid_curve_csv(runlog_csv: &str) -> String {
    let mut out = String::from("kimg,fid\n");
    for line in runlog_csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() >= 4 && !cols[3].is_empty() {
            out.push_str(cols[0]);
            out.push(',');
            out.push_str(cols[3]);
            out.push('\n');
        }
    }
    out
}

fn by_option(a: Option<f64>, b: Option<f64>) -> Ordering {
    match (a, b) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
}

fn discover(root: &Path, skip: &Path) -> anyhow::Result<(Vec<PathBuf>, Vec<PathBuf>)> {
    let mut runs = Vec::new();
    let mut attacks = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.with_context(|| format!("scanning {}", root.display()))?;
        let path = entry.path();
        if path.starts_with(skip) || !entry.file_type().is_file() {
            continue;
        }
        let dir = path.parent().expect("file has a parent").to_path_buf();
        match path.file_name().and_then(|n| n.to_str()) {
            Some("runlog.json") => runs.push(dir),
            Some("report.json") if dir.join("meta.json").is_file() => attacks.push(dir),
            _ => {}
        }
    }
    Ok((runs, attacks))
}

pub fn run(a: ReportArgs) -> anyhow::Result<()> {
    if !a.runs.is_dir() {
        bail!("{} is not a directory", a.runs.display());
    }
    let skip = a.out.canonicalize().unwrap_or_else(|_| a.out.clone());
    let root = a.runs.canonicalize()?;
    let (run_dirs, attack_dirs) = discover(&root, &skip)?;
    if run_dirs.is_empty() && attack_dirs.is_empty() {
        bail!("no run logs or attack reports found under {}", a.runs.display());
    }
    fresh_dir(&a.out, a.force)?;

    let mut fid_rows = Vec::new();
    let curves = a.out.join("curves");
    if !run_dirs.is_empty() {
        std::fs::create_dir_all(&curves)?;
    }
    for dir in &run_dirs {
        let log = RunLog::load(dir)?;
        let run = rel(&root, dir);
        let csv_path = dir.join("runlog.csv");
        let csv = std::fs::read_to_string(&csv_path).with_context(|| format!("reading {}", csv_path.display()))?;
        write_text(&curves.join(format!("{}.csv", run.replace(['/', '\\'], "__"))), &fid_curve_csv(&csv))?;
        let kind = log.config.model_kind;
        fid_rows.push(FidRow {
            rank: 0,
            run,
            model_kind: kind.to_string(),
            image_size: log.config.image_size.to_string(),
            status: match &log.status {
                RunStatus::Running => "running".into(),
                RunStatus::Completed => "completed".into(),
                RunStatus::Diverged { step, .. } => format!("diverged at step {step}"),
            },
            best_fid: log.best.as_ref().map(|b| b.fid),
            best_kimg: log.best.as_ref().map(|b| b.kimg),
            final_fid: log.fid_curve().last().map(|&(_, f)| f),
            embedder_id: log.embedder_id.clone(),
            dataset_size: log.dataset_size,
            config_hash: log.config_hash.clone(),
            reference_best_fid: reference::best_fid(kind),
        });
    }
    fid_rows.sort_by(|x, y| by_option(x.best_fid, y.best_fid).then_with(|| x.run.cmp(&y.run)));
    for (i, r) in fid_rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }

    let mut deer_rows = Vec::new();
    for dir in &attack_dirs {
        let report: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(dir.join("report.json"))?)
            .with_context(|| format!("parsing {}", dir.join("report.json").display()))?;
        let meta: AttackMeta = serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)
            .with_context(|| format!("parsing {}", dir.join("meta.json").display()))?;
        deer_rows.push(DeerRow {
            rank: 0,
            run: rel(&root, dir),
            model_kind: meta.model_kind.map(|k| k.to_string()),
            classifier_id: report.classifier_id.clone(),
            threshold: report.threshold,
            apcer: report.metrics.apcer,
            bpcer: report.metrics.bpcer,
            acer: report.metrics.acer,
            d_eer: report.d_eer.eer,
            d_eer_threshold: report.d_eer.threshold,
            fraction_pai_bonafide: report.fraction_pai_bonafide,
            reference_d_eer_percent: meta.model_kind.map(reference::d_eer_percent),
        });
    }
    deer_rows.sort_by(|x, y| x.d_eer.total_cmp(&y.d_eer).then_with(|| x.run.cmp(&y.run)));
    for (i, r) in deer_rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }

    if !fid_rows.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "rank", "run", "model_kind", "image_size", "status", "best_fid", "best_kimg", "final_fid", "embedder_id",
            "dataset_size", "config_hash", "reference_best_fid",
        ])?;
        for r in &fid_rows {
            w.write_record([
                r.rank.to_string(),
                r.run.clone(),
                r.model_kind.clone(),
                r.image_size.clone(),
                r.status.clone(),
                opt(r.best_fid),
                opt(r.best_kimg),
                opt(r.final_fid),
                r.embedder_id.clone(),
                r.dataset_size.to_string(),
                r.config_hash.clone(),
                r.reference_best_fid.to_string(),
            ])?;
        }
        write_text(&a.out.join("fid_table.csv"), &String::from_utf8(w.into_inner()?)?)?;
        write_json(&a.out.join("fid_table.json"), &fid_rows)?;
    }
    if !deer_rows.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "rank", "run", "model_kind", "classifier_id", "threshold", "apcer", "bpcer", "acer", "d_eer",
            "d_eer_threshold", "fraction_pai_bonafide", "reference_d_eer_percent",
        ])?;
        for r in &deer_rows {
            w.write_record([
                r.rank.to_string(),
                r.run.clone(),
                r.model_kind.clone().unwrap_or_default(),
                r.classifier_id.clone(),
                r.threshold.to_string(),
                r.apcer.to_string(),
                r.bpcer.to_string(),
                r.acer.to_string(),
                r.d_eer.to_string(),
                r.d_eer_threshold.to_string(),
                r.fraction_pai_bonafide.to_string(),
                opt(r.reference_d_eer_percent),
            ])?;
        }
        write_text(&a.out.join("d_eer_table.csv"), &String::from_utf8(w.into_inner()?)?)?;
        write_json(&a.out.join("d_eer_table.json"), &deer_rows)?;
    }
    write_json(
        &a.out.join("reference.json"),
        &serde_json::json!({
            "note": "published full-scale figures, for comparison only",
            "best_fid": reference::BEST_FID.iter().map(|(k, v)| (k.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>(),
            "d_eer_percent": reference::D_EER_PERCENT.iter().map(|(k, v)| (k.to_string(), *v)).collect::<std::collections::BTreeMap<_, _>>(),
            "mixed_set": {
                "apcer": reference::MIXED_SET_APCER,
                "bpcer": reference::MIXED_SET_BPCER,
                "acer_published": reference::MIXED_SET_ACER_PUBLISHED,
                "acer_mean": (reference::MIXED_SET_APCER + reference::MIXED_SET_BPCER) / 2.0,
            },
            "synthetic_only_bonafide_fraction": reference::SYNTHETIC_ONLY_BONAFIDE_FRACTION,
        }),
    )?;

    println!("{} training runs, {} attack reports -> {}", fid_rows.len(), deer_rows.len(), a.out.display());
    for r in &fid_rows {
        println!(
            "{:>3}. {:<32} {:<15} best FID {}",
            r.rank,
            r.run,
            r.model_kind,
            r.best_fid.map_or("-".into(), |f| format!("{f:.4}"))
        );
    }
    for r in &deer_rows {
        println!("{:>3}. {:<32} D-EER {:.4}", r.rank, r.run, r.d_eer);
    }
    Ok(())
}
