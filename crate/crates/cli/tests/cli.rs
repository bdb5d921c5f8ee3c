//! End-to-end runs of the `spai` binary on a small toy corpus.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use spai_core::corpus::toy::{write_toy_corpus, ToyCorpusSpec};
use spai_core::padlab::{d_eer, det_curve, iso_metrics, write_score_file, ExperimentReport, GroundTruth, PadScore};
use spai_core::trainer::RunLog;

fn spai(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spai")).args(args).env_remove("SPAI_INCEPTION_WEIGHTS").output().expect("spawn spai")
}

fn ok(args: &[&str]) -> String {
    let out = spai(args);
    assert!(
        out.status.success(),
        "spai {args:?} failed ({:?}):\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    spai(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn toy(dir: &Path, count: usize, seed: u64) -> PathBuf {
    write_toy_corpus(dir, ToyCorpusSpec { count, width: 32, height: 32, seed }).unwrap();
    dir.to_path_buf()
}

fn train_small(corpus: &Path, run_dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train", "--recipe", "exp3-wgangp", "--corpus", s(corpus), "--run-dir", s(run_dir), "--image-size", "32x32",
        "--budget-kimg", "0.12", "--batch-size", "10", "--eval-every-kimg", "0.06", "--fid-samples", "20",
        "--base-channels", "8", "--max-channels", "16", "--deterministic",
    ];
    args.extend_from_slice(extra);
    Command::new(env!("CARGO_BIN_EXE_spai")).args(&args).env_remove("SPAI_INCEPTION_WEIGHTS").output().unwrap()
}

#[test]
fn usage_errors_exit_with_status_two() {
    assert_eq!(code(&["ingest"]), 2);
    assert_eq!(code(&["train", "--dry-run"]), 2);
    assert_eq!(code(&["train", "--recipe", "exp9"]), 2);
    assert_eq!(code(&["train", "--recipe", "exp2-wgan", "--image-size", "32by32", "--dry-run"]), 2);
    // No corpus anywhere.
    let t = tempfile::tempdir().unwrap();
    let run = t.path().join("run");
    assert_eq!(code(&["train", "--recipe", "exp2-wgan", "--run-dir", s(&run)]), 2);
    assert_eq!(code(&["attack", "--pai", "x", "--bonafide", "y", "--clf", "usach", "--out", "z"]), 2);
    assert_eq!(code(&["generate", "--ckpt", "best", "--n", "3", "--out", s(&run)]), 2);
    assert_eq!(code(&["--help"]), 0);
}

#[test]
fn ingest_writes_a_manifest_and_respects_force() {
    let t = tempfile::tempdir().unwrap();
    let empty = t.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let m = t.path().join("m.json");
    assert_eq!(code(&["ingest", "--dir", s(&empty), "--out", s(&m)]), 1);

    let corpus = toy(&t.path().join("corpus"), 6, 1);
    std::fs::write(corpus.join("notes.txt"), "not an image").unwrap();
    let out = ok(&["ingest", "--dir", s(&corpus), "--out", s(&m)]);
    assert!(out.starts_with("6 records (32x32 modal), 1 skipped"), "{out}");
    let manifest = spai_core::corpus::Manifest::load(&m).unwrap();
    assert_eq!(manifest.len(), 6);
    assert_eq!(code(&["ingest", "--dir", s(&corpus), "--out", s(&m)]), 1);
    ok(&["ingest", "--dir", s(&corpus), "--out", s(&m), "--force"]);
}

#[test]
fn recipes_match_golden_configs() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for recipe in ["exp1-cgan-80x160", "exp1-cgan-320x240", "exp2-wgan", "exp3-wgangp", "exp4-stylegan2", "unknown-attack"] {
        let want = std::fs::read_to_string(golden.join(format!("{recipe}.json"))).unwrap();
        assert_eq!(ok(&["train", "--recipe", recipe, "--dry-run"]), want, "{recipe}");
    }
    // A dumped config loads back unchanged.
    let t = tempfile::tempdir().unwrap();
    let cfg = t.path().join("c.json");
    std::fs::copy(golden.join("exp2-wgan.json"), &cfg).unwrap();
    assert_eq!(ok(&["train", "--config", s(&cfg), "--dry-run"]), std::fs::read_to_string(&cfg).unwrap());
    let dumped = ok(&["train", "--config", s(&cfg), "--seed", "9", "--batch-size", "7", "--dry-run"]);
    let v: serde_json::Value = serde_json::from_str(&dumped).unwrap();
    assert_eq!((v["seed"].as_u64(), v["train"]["batch_size"].as_u64()), (Some(9), Some(7)));
}

#[test]
fn force_never_clears_foreign_directories() {
    let t = tempfile::tempdir().unwrap();
    let corpus = toy(&t.path().join("corpus"), 4, 2);
    let mine = t.path().join("mine");
    std::fs::create_dir(&mine).unwrap();
    std::fs::write(mine.join("keep.txt"), "x").unwrap();
    let out = t.path().join("sharp.csv");
    let args = ["attack", "--pai", s(&corpus), "--bonafide", s(&corpus), "--clf", "const:0.5", "--out", s(&mine), "--force"];
    assert_eq!(code(&args), 1);
    assert!(mine.join("keep.txt").exists());
    ok(&["sharpness", "--dir", s(&corpus), "--out", s(&out)]);
    assert_eq!(code(&["sharpness", "--dir", s(&corpus), "--out", s(&out)]), 1);
    ok(&["sharpness", "--dir", s(&corpus), "--out", s(&out), "--force"]);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("id,sharpness\ntoy_00000_L_F.png,"));
}

#[test]
fn train_generate_score_and_report() {
    let t = tempfile::tempdir().unwrap();
    let corpus = toy(&t.path().join("corpus"), 30, 3);
    let runs = t.path().join("runs");
    let run = runs.join("wgangp");
    let out = train_small(&corpus, &run, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["runlog.csv", "runlog.json", "run_config.json", "manifest.json", "config.json"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    // The run directory is ours, so it needs --force but no more.
    assert_eq!(train_small(&corpus, &run, &[]).status.code(), Some(1));
    assert!(train_small(&corpus, &run, &["--force"]).status.success());

    let gen = t.path().join("gen");
    ok(&["generate", "--ckpt", "best", "--run-dir", s(&run), "--n", "12", "--seed", "4", "--out", s(&gen)]);
    let pngs = std::fs::read_dir(&gen).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png")).count();
    assert_eq!(pngs, 12);
    assert!(gen.join("provenance.csv").is_file() && gen.join("generate.json").is_file());
    assert_eq!(code(&["generate", "--ckpt", "best", "--run-dir", s(&run), "--n", "2", "--label", "male", "--out", s(&t.path().join("g2"))]), 1);

    // FID of a set with itself.
    let fid_json = t.path().join("fid.json");
    ok(&["fid", "--a", s(&corpus), "--b", s(&corpus), "--embedder", "lite", "--out", s(&fid_json)]);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fid_json).unwrap()).unwrap();
    assert!(v["report"]["fid"].as_f64().unwrap().abs() < 1e-6, "{v}");
    assert_eq!(v["meta"]["command"], "fid");

    // Externally scored attack equals the library computation.
    let mut scores = Vec::new();
    for (i, id) in (0..12).map(|i| format!("gen_{i:06}.png")).enumerate() {
        scores.push(PadScore::new(id, GroundTruth::Attack, (i as f64 * 0.37) % 1.0).unwrap());
    }
    let mut names: Vec<String> = std::fs::read_dir(&corpus).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    for (i, id) in names.iter().enumerate() {
        scores.push(PadScore::new(id.clone(), GroundTruth::Bonafide, (0.2 + i as f64 * 0.29) % 1.0).unwrap());
    }
    let score_file = t.path().join("scores.csv");
    write_score_file(&score_file, &scores).unwrap();
    let attack = runs.join("attack_wgangp");
    let clf = format!("file:{}", score_file.display());
    ok(&["attack", "--pai", s(&gen), "--bonafide", s(&corpus), "--clf", &clf, "--model-kind", "wgan_gp", "--out", s(&attack)]);
    let report: ExperimentReport = serde_json::from_str(&std::fs::read_to_string(attack.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.metrics, iso_metrics(&scores, 0.5).unwrap());
    assert_eq!(report.d_eer, d_eer(&det_curve(&scores).unwrap()));
    assert_eq!(report.n_pai, 12);

    let rep = t.path().join("report");
    ok(&["report", "--runs", s(&runs), "--out", s(&rep)]);
    let table = std::fs::read_to_string(rep.join("fid_table.csv")).unwrap();
    assert_eq!(table.lines().count(), 2, "{table}");
    assert!(table.lines().nth(1).unwrap().starts_with("1,wgangp,wgan_gp,32x32,completed,"));
    let deer = std::fs::read_to_string(rep.join("d_eer_table.csv")).unwrap();
    assert!(deer.lines().nth(1).unwrap().starts_with("1,attack_wgangp,wgan_gp,"), "{deer}");

    // The curve file lists each evaluation of the run log.
    let curve = std::fs::read_to_string(rep.join("curves/wgangp.csv")).unwrap();
    let log = RunLog::load(&run).unwrap();
    let parsed: Vec<(f64, f64)> = curve
        .lines()
        .skip(1)
        .map(|l| {
            let (k, f) = l.split_once(',').unwrap();
            (k.parse().unwrap(), f.parse().unwrap())
        })
        .collect();
    let expected = log.fid_curve();
    assert_eq!(parsed.len(), expected.len());
    assert!(expected.len() >= 3);
    for ((k, f), (ek, ef)) in parsed.iter().zip(&expected) {
        assert!((k - ek).abs() < 5e-4 && (f - ef).abs() < 5e-5, "{k},{f} vs {ek},{ef}");
    }
    assert_eq!(code(&["report", "--runs", s(&runs), "--out", s(&rep)]), 1);
    ok(&["report", "--runs", s(&runs), "--out", s(&rep), "--force"]);

    let nothing = t.path().join("nothing");
    std::fs::create_dir(&nothing).unwrap();
    assert_eq!(code(&["report", "--runs", s(&nothing), "--out", s(&t.path().join("r2"))]), 1);
}

#[test]
fn tsne_maps_two_sets() {
    let t = tempfile::tempdir().unwrap();
    let a = toy(&t.path().join("a"), 12, 5);
    let b = t.path().join("b");
    std::fs::create_dir(&b).unwrap();
    for e in std::fs::read_dir(&a).unwrap() {
        let p = e.unwrap().path();
        let img = spai_core::corpus::PixelTensor::load(&p).unwrap();
        let dark: Vec<f32> = img.data().iter().map(|v| 0.2 * v - 0.7).collect();
        spai_core::corpus::PixelTensor::new(32, 32, dark).unwrap().save_png(&b.join(p.file_name().unwrap())).unwrap();
    }
    let out = t.path().join("map.csv");
    let sa = format!("real={}", a.display());
    let sb = format!("dark={}", b.display());
    ok(&["tsne", "--set", &sa, "--set", &sb, "--perplexity", "4", "--iterations", "500", "--out", s(&out)]);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 25);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert!(v["silhouette"].as_f64().unwrap() > 0.5, "{v}");
    assert_eq!(code(&["tsne", "--set", &sa, "--perplexity", "30", "--out", s(&t.path().join("m2.csv"))]), 1);
}
