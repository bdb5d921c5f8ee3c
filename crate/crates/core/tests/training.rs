//! Training-loop contracts on tiny toy corpora.

use spai_autograd::ParamSet;
use spai_core::corpus::toy::{toy_manifest, toy_records, ToyCorpusSpec};
use spai_core::corpus::Dataset;
use spai_core::ganzoo::{ConditionLabel, ImageSize, ModelKind};
use spai_core::trainer::*;

fn toy_dataset(count: usize, side: usize, seed: u64) -> Dataset {
    let recs = toy_records(ToyCorpusSpec { count, width: side, height: side, seed });
    let genders = recs.iter().map(|(r, _)| r.gender).collect();
    Dataset::from_images(recs.into_iter().map(|(_, i)| i).collect(), genders)
}

fn tiny(kind: ModelKind, side: usize, kimg: f64) -> TrainConfig {
    let mut c = TrainConfig::preset(kind, ImageSize::new(side, side));
    c.batch_size = 10;
    c.budget = Budget::Kimg(kimg);
    c.eval_every_kimg = kimg / 2.0;
    c.base_channels = 4;
    c.max_channels = 16;
    if kind != ModelKind::Stylegan2Lite {
        c.latent_dim = Some(16);
    }
    c.fid_samples = 40;
    c.log_every_steps = 5;
    c.deterministic_clock = true;
    c
}

#[test]
fn degenerate_configs_are_rejected() {
    let ds = toy_dataset(20, 16, 0);
    let mut c = tiny(ModelKind::WganGp, 16, 0.1);
    c.budget = Budget::Epochs(0.0);
    assert!(matches!(train_dataset::<f32>(&c, &ds, TrainOptions::default()), Err(TrainError::InvalidConfig(_))));
    let mut c = tiny(ModelKind::Wgan, 16, 0.1);
    c.optimizer = OptimizerConfig::Adam { beta1: 0.5, beta2: 0.999 };
    assert!(matches!(train_dataset::<f32>(&c, &ds, TrainOptions::default()), Err(TrainError::InvalidConfig(_))));
}

#[test]
fn same_seeds_give_identical_logs_and_kimg_is_exact() {
    let ds = toy_dataset(40, 16, 1);
    let c = tiny(ModelKind::Cgan, 16, 0.2);
    let a = train_dataset::<f32>(&c, &ds, TrainOptions::default()).unwrap();
    let b = train_dataset::<f32>(&c, &ds, TrainOptions::default()).unwrap();
    assert_eq!(a.log.to_csv(), b.log.to_csv());
    assert_eq!(a.log.rows, b.log.rows);
    assert_eq!(a.log.rows.last().unwrap().step, 20);
    for r in &a.log.rows {
        assert_eq!(r.images_seen, r.step * 10);
        assert_eq!(r.kimg, (r.step * 10) as f64 / 1000.0);
    }
    assert!(a.log.rows.windows(2).all(|w| w[0].kimg < w[1].kimg));
    assert_eq!(a.log.status, RunStatus::Completed);
    assert!(a.log.fid_curve().len() >= 3);

    let mut c2 = c.clone();
    c2.seeds = Seeds::all(99);
    let other = train_dataset::<f32>(&c2, &ds, TrainOptions::default()).unwrap();
    assert_ne!(other.log.to_csv(), a.log.to_csv());
}

struct ClipWatch {
    bound: f32,
    steps: u64,
    violations: u64,
}

impl TrainObserver<f32> for ClipWatch {
    fn on_critic_step(&mut self, _: u64, critic: &ParamSet<f32>) {
        self.steps += 1;
        if critic.max_abs() > self.bound {
            self.violations += 1;
        }
    }
}

#[test]
fn wgan_weights_stay_clipped_every_step() {
    let ds = toy_dataset(20, 16, 2);
    let c = tiny(ModelKind::Wgan, 16, 0.5);
    let mut watch = ClipWatch { bound: c.clip_bound as f32, steps: 0, violations: 0 };
    train_dataset::<f32>(&c, &ds, TrainOptions { observer: Some(&mut watch), ..Default::default() }).unwrap();
    assert_eq!(watch.steps, 50);
    assert_eq!(watch.violations, 0);
}

#[test]
fn run_directory_layout_and_checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy_dataset(20, 16, 3);
    let mut c = tiny(ModelKind::WganGp, 16, 0.1);
    c.sample_images = 3;
    let out = train_dataset::<f32>(&c, &ds, TrainOptions { run_dir: Some(dir.path().into()), ..Default::default() }).unwrap();
    let root = dir.path();
    assert!(root.join("config.json").exists());
    let csv = std::fs::read_to_string(root.join("runlog.csv")).unwrap();
    assert!(csv.starts_with(RUNLOG_HEADER));
    assert_eq!(RunLog::load(root).unwrap().rows, out.log.rows);
    assert!(root.join("samples/0.100/002.png").exists());
    assert!(!root.join("samples/0.100/003.png").exists());

    let last = root.join("checkpoints/ckpt_0.100.bin");
    let ckpt = Checkpoint::<f32>::load(&last).unwrap();
    assert_eq!(ckpt.model, out.model);
    assert_eq!(ckpt.meta.step, 10);
    let from_disk = generate(&ckpt, 4, 7, None).unwrap();
    let in_memory = generate(&Checkpoint { digest: ckpt.digest.clone(), ..ckpt.clone() }, 4, 7, None).unwrap();
    for (a, b) in from_disk.iter().zip(&in_memory) {
        assert_eq!(a.image, b.image);
    }
    let best = out.best_checkpoint.unwrap();
    assert!(best.exists());

    let mut bytes = std::fs::read(&last).unwrap();
    bytes[40] ^= 0x10;
    std::fs::write(&last, bytes).unwrap();
    assert!(matches!(Checkpoint::<f32>::load(&last), Err(TrainError::Checksum(_))));
}

#[test]
fn divergence_stops_the_run_and_keeps_the_log() {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy_dataset(20, 16, 4);
    let mut c = tiny(ModelKind::WganGp, 16, 1.0);
    c.divergence_threshold = 1e-12;
    c.divergence_patience = 3;
    let err = train_dataset::<f32>(&c, &ds, TrainOptions { run_dir: Some(dir.path().into()), ..Default::default() })
        .err()
        .unwrap();
    match err {
        TrainError::Diverged { step, log, .. } => {
            assert_eq!(step, 3);
            assert!(matches!(log.status, RunStatus::Diverged { step: 3, .. }));
        }
        other => panic!("expected divergence, got {other}"),
    }
    let saved = RunLog::load(dir.path()).unwrap();
    assert!(matches!(saved.status, RunStatus::Diverged { .. }));
}

#[test]
fn trains_from_a_manifest_on_disk() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = toy_manifest(&dir.path().join("corpus"), ToyCorpusSpec { count: 20, width: 24, height: 20, seed: 5 }).unwrap();
    let mut c = tiny(ModelKind::Cgan, 16, 0.04);
    c.image_size = ImageSize::new(16, 16);
    let out = train::<f32>(&c, &manifest, Some(&dir.path().join("run"))).unwrap();
    assert_eq!(out.log.dataset_size, 20);
    assert!(dir.path().join("run/runlog.csv").exists());
}

#[test]
fn style_model_trains_and_reports_its_crop() {
    let ds = toy_dataset(10, 20, 6);
    let mut c = tiny(ModelKind::Stylegan2Lite, 20, 0.02);
    c.image_size = ImageSize::new(20, 20);
    c.fid_samples = 10;
    let out = train_dataset::<f32>(&c, &ds, TrainOptions::default()).unwrap();
    assert_eq!(out.model.arch.image_size, ImageSize::new(16, 16));
    assert!(out.log.notes.iter().any(|n| n.contains("16x16")));
    assert!(out.log.rows.iter().all(|r| r.loss_d.is_none_or(f64::is_finite)));
}

#[test]
fn generated_sets_are_regenerable_and_seed_dependent() {
    let ds = toy_dataset(20, 16, 7);
    let out = train_dataset::<f32>(&tiny(ModelKind::Cgan, 16, 0.02), &ds, TrainOptions::default()).unwrap();
    let arch = out.model.arch.clone();
    let ckpt = Checkpoint {
        model: out.model,
        meta: CheckpointMeta {
            arch,
            step: 0,
            images_seen: 0,
            kimg: 0.0,
            config_hash: String::new(),
            seeds: Seeds::all(0),
            latent_rng: RngState::capture(&<rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0)),
        },
        digest: None,
    };
    let y = Some(ConditionLabel::Male);
    let many = generate(&ckpt, 3000, 11, y).unwrap();
    assert_eq!(many.len(), 3000);
    let mut seen = std::collections::HashSet::new();
    for g in &many {
        assert!(seen.insert(g.image.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()));
    }
    let once = generate(&ckpt, 1, 11, y).unwrap();
    let twice = generate(&ckpt, 1, 11, y).unwrap();
    assert_eq!(once[0].image, twice[0].image);
    assert_eq!(once[0].image, many[0].image);

    let other = generate(&ckpt, 20, 12, y).unwrap();
    let dist: f64 = many[..20]
        .iter()
        .zip(&other)
        .map(|(a, b)| a.image.data().iter().zip(b.image.data()).map(|(p, q)| (p - q).abs() as f64).sum::<f64>())
        .sum();
    assert!(dist > 0.0);
}

#[test]
fn sweeps_isolate_failures_and_match_single_runs() {
    let ds = toy_dataset(20, 16, 8);
    let mut base = tiny(ModelKind::WganGp, 16, 0.1);
    base.divergence_patience = 2;
    let single = Sweep { base: base.clone(), axis: SweepAxis::LearningRate, values: vec![1e-4] };
    let runs = hyperparameter_sweep::<f32>(&single, &ds, None, None);
    let direct = train_dataset::<f32>(&base, &ds, TrainOptions::default()).unwrap();
    assert_eq!(runs[0].outcome.as_ref().unwrap().to_csv(), direct.log.to_csv());

    let sweep = Sweep { base, axis: SweepAxis::LearningRate, values: vec![2.5e-3, 1e9, 1e-4] };
    let dir = tempfile::tempdir().unwrap();
    let runs = hyperparameter_sweep::<f32>(&sweep, &ds, None, Some(dir.path()));
    assert_eq!(runs.len(), 3);
    assert!(runs[0].outcome.is_ok());
    assert!(runs[1].outcome.as_ref().unwrap_err().contains("diverged"));
    assert!(runs[2].outcome.is_ok());
    let curve = merged_fid_curve(SweepAxis::LearningRate, &runs);
    assert!(curve.starts_with("learning_rate,kimg,fid\n"));
    assert!(curve.lines().any(|l| l.starts_with("0.0025,")));
    assert!(!curve.lines().any(|l| l.starts_with("1000000000,")));
    assert!(dir.path().join("run_002/runlog.csv").exists());
}
