use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spai_autograd::optim::{Adam, Optimizer, RmsProp};
use spai_autograd::{grad, no_grad, ParamSet, Scalar, Tensor, Var};

use super::{
    BestCheckpoint, Checkpoint, CheckpointMeta, EmbedderChoice, LogRow, OptimizerConfig, RngState, RunLog, RunStatus,
    TrainConfig, TrainError,
};
use crate::corpus::{augment, batch_plan, fit_image, AugmentationPolicy, Dataset, Fit, Manifest, PixelTensor};
use crate::ganzoo::model::tensor_from_images;
use crate::ganzoo::{
    adversarial_losses_from_logits, clip_weights_in_place, critic_forward, generator_forward, generator_loss_from_logits,
    gradient_penalty, latent_rng, one_hot, sample_latent, wasserstein_critic_loss, wasserstein_generator_loss,
    ArchDescriptor, ConditionLabel, GanModel, ModelKind, PerSampleNoise, RngNoise,
};
use crate::quality::{frechet_distance_detailed, gaussian_summary, EmbeddingModel, GaussianSummary, InceptionV3, LiteEmbedder, LiteEmbedderConfig};

/// Hooks called from inside the training loop.
pub trait TrainObserver<T: Scalar> {
    fn on_critic_step(&mut self, _step: u64, _critic: &ParamSet<T>) {}
    fn on_generator_step(&mut self, _step: u64, _generator: &ParamSet<T>) {}
    fn on_row(&mut self, _row: &LogRow) {}
}

pub struct TrainOptions<'a, T: Scalar> {
    /// Where config, log, checkpoints and samples go; nothing is written
    /// when absent.
    pub run_dir: Option<PathBuf>,
    pub observer: Option<&'a mut dyn TrainObserver<T>>,
    /// Overrides the embedder named in the config.
    pub embedder: Option<&'a dyn EmbeddingModel>,
}

impl<T: Scalar> Default for TrainOptions<'_, T> {
    fn default() -> Self {
        Self { run_dir: None, observer: None, embedder: None }
    }
}

pub struct TrainOutcome<T: Scalar> {
    pub log: RunLog,
    pub model: GanModel<T>,
    pub best_checkpoint: Option<PathBuf>,
}

pub fn build_embedder(
    choice: &EmbedderChoice,
    corpus: &[PixelTensor],
    seed: u64,
) -> Result<Box<dyn EmbeddingModel>, TrainError> {
    Ok(match choice {
        EmbedderChoice::Lite => Box::new(LiteEmbedder::fit(corpus, LiteEmbedderConfig { seed, ..Default::default() })?),
        EmbedderChoice::Inception { weights } => Box::new(InceptionV3::from_safetensors(weights)?),
    })
}

fn fit_for(config: &TrainConfig) -> Fit {
    let s = config.effective_size();
    if config.model_kind == ModelKind::Stylegan2Lite {
        Fit::CenterCropSquare(s.width)
    } else {
        Fit::Resize(s.width, s.height)
    }
}

/// Loads the manifest's images at the training size and trains.
pub fn train<T: Scalar>(config: &TrainConfig, manifest: &Manifest, run_dir: Option<&Path>) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    let ds = Dataset::load(manifest, fit_for(config))?;
    train_dataset(config, &ds, TrainOptions { run_dir: run_dir.map(Path::to_path_buf), ..Default::default() })
}

fn make_optimizer<T: Scalar>(config: &TrainConfig) -> Box<dyn Optimizer<T>> {
    match config.optimizer {
        OptimizerConfig::Adam { beta1, beta2 } => Box::new(Adam::new(config.learning_rate, beta1, beta2)),
        OptimizerConfig::Rmsprop { alpha } => {
            let mut o = RmsProp::new(config.learning_rate);
            o.alpha = alpha;
            Box::new(o)
        }
    }
}

fn values<T: Scalar>(vs: Vec<Var<T>>) -> Vec<Tensor<T>> {
    vs.into_iter().map(|v| v.value().clone()).collect()
}

struct Run<'a, T: Scalar> {
    config: &'a TrainConfig,
    model: GanModel<T>,
    embedder: &'a dyn EmbeddingModel,
    real_summary: GaussianSummary<f64>,
    dataset_len: usize,
    log: RunLog,
    dir: Option<PathBuf>,
    started: Instant,
    step: u64,
    images_seen: u64,
    latent: ChaCha8Rng,
    last_loss_d: Option<f64>,
    last_loss_g: Option<f64>,
    best_path: Option<PathBuf>,
}

impl<T: Scalar> Run<'_, T> {
    fn kimg(&self) -> f64 {
        self.images_seen as f64 / 1000.0
    }

    fn wall(&self) -> f64 {
        if self.config.deterministic_clock {
            0.0
        } else {
            self.started.elapsed().as_secs_f64()
        }
    }

    fn row_mut(&mut self) -> &mut LogRow {
        let need_new = self.log.rows.last().is_none_or(|r| r.step != self.step);
        if need_new {
            self.log.rows.push(LogRow {
                step: self.step,
                images_seen: self.images_seen,
                kimg: self.kimg(),
                epoch: self.images_seen as f64 / self.dataset_len as f64,
                loss_d: None,
                loss_g: None,
                fid: None,
                wall_s: 0.0,
                checkpoint: None,
            });
        }
        let wall = self.wall();
        let (ld, lg) = (self.last_loss_d, self.last_loss_g);
        let row = self.log.rows.last_mut().expect("row exists");
        row.loss_d = ld;
        row.loss_g = lg;
        row.wall_s = wall;
        row
    }

    /// Generated evaluation set: image `i` comes from stream `i` of the
    /// eval seed, so every evaluation sees the same latents.
    fn eval_images(&self) -> Result<Vec<PixelTensor>, TrainError> {
        let n = self.config.fid_samples;
        let d = self.model.arch.latent_dim;
        let mut out = Vec::with_capacity(n);
        for start in (0..n).step_by(50) {
            let idx: Vec<usize> = (start..(start + 50).min(n)).collect();
            let mut rngs: Vec<ChaCha8Rng> = idx.iter().map(|&i| latent_rng(self.config.seeds.eval, i as u64)).collect();
            let codes: Vec<_> = rngs.iter_mut().flat_map(|r| sample_latent::<T, _>(r, 1, d)).collect();
            let labels: Vec<ConditionLabel> =
                idx.iter().map(|i| if i % 2 == 0 { ConditionLabel::Female } else { ConditionLabel::Male }).collect();
            let cond = self.model.arch.kind.is_conditional().then_some(labels.as_slice());
            out.extend(self.model.synthesize(&codes, cond, &mut PerSampleNoise(rngs))?);
        }
        Ok(out)
    }

    fn evaluate(&mut self) -> Result<(), TrainError> {
        let images = self.eval_images()?;
        let summary = gaussian_summary(&self.embedder.embed(&images)?)?;
        let fid = frechet_distance_detailed(&self.real_summary, &summary)?.value;
        let kimg = self.kimg();
        let mut ckpt_name = None;
        if let Some(dir) = self.dir.clone() {
            let sample_dir = dir.join("samples").join(format!("{kimg:.3}"));
            std::fs::create_dir_all(&sample_dir).map_err(|e| TrainError::io(&sample_dir, e))?;
            for (i, img) in images.iter().take(self.config.sample_images).enumerate() {
                img.save_png(&sample_dir.join(format!("{i:03}.png")))?;
            }
            let name = format!("checkpoints/ckpt_{kimg:.3}.bin");
            let mut ck = Checkpoint {
                model: self.model.clone(),
                meta: CheckpointMeta {
                    arch: self.model.arch.clone(),
                    step: self.step,
                    images_seen: self.images_seen,
                    kimg,
                    config_hash: self.log.config_hash.clone(),
                    seeds: self.config.seeds,
                    latent_rng: RngState::capture(&self.latent),
                },
                digest: None,
            };
            ck.save(&dir.join(&name))?;
            ckpt_name = Some(name);
        }
        let row = self.row_mut();
        row.fid = Some(fid);
        row.checkpoint = ckpt_name.clone();
        if self.log.best.as_ref().is_none_or(|b| fid < b.fid) {
            self.best_path = ckpt_name.as_ref().zip(self.dir.as_ref()).map(|(n, d)| d.join(n));
            self.log.best = Some(BestCheckpoint { kimg, fid, checkpoint: ckpt_name });
        }
        log::info!("kimg {kimg:.3}: fid {fid:.4}");
        self.flush()
    }

    fn flush(&self) -> Result<(), TrainError> {
        match &self.dir {
            Some(d) => self.log.write(d),
            None => Ok(()),
        }
    }
}

/// Trains on an in-memory dataset. Images not already at the training size
/// are fitted to it.
pub fn train_dataset<T: Scalar>(
    config: &TrainConfig,
    dataset: &Dataset,
    mut options: TrainOptions<'_, T>,
) -> Result<TrainOutcome<T>, TrainError> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::InvalidConfig("empty dataset".into()));
    }
    let size = config.effective_size();
    let fit = fit_for(config);
    let images: Vec<PixelTensor> = dataset
        .images
        .iter()
        .map(|img| {
            if (img.width(), img.height()) == (size.width, size.height) {
                Ok(img.clone())
            } else {
                fit_image(img, fit)
            }
        })
        .collect::<Result<_, _>>()?;
    let labels: Vec<ConditionLabel> = if config.model_kind.is_conditional() {
        dataset.genders.iter().map(|&g| ConditionLabel::try_from(g)).collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };

    let arch = ArchDescriptor::new(config.model_kind, size, config.latent_dim(), config.base_channels, config.max_channels)?;
    let mut model = GanModel::<T>::new(arch, &mut ChaCha8Rng::seed_from_u64(config.seeds.init));
    if config.model_kind == ModelKind::Wgan {
        clip_weights_in_place(&mut model.critic, config.clip_bound)?;
    }

    let owned_embedder;
    let embedder: &dyn EmbeddingModel = match options.embedder {
        Some(e) => e,
        None => {
            owned_embedder = build_embedder(&config.embedder, &images, config.seeds.eval)?;
            owned_embedder.as_ref()
        }
    };
    let real_summary = gaussian_summary(&embedder.embed(&images)?)?;

    let mut notes = Vec::new();
    if size != config.image_size {
        notes.push(format!("trained on a {size} center crop of {} inputs", config.image_size));
    }
    if config.fid_samples < crate::quality::FID_BIAS_THRESHOLD {
        notes.push(format!("FID from {} generated samples is biased upward", config.fid_samples));
    }
    let total_images = config.budget.images(images.len()).ceil() as u64;
    let log = RunLog {
        config: config.clone(),
        config_hash: config.hash(),
        embedder_id: embedder.id(),
        dataset_size: images.len(),
        total_steps: total_images.div_ceil(config.batch_size as u64),
        notes,
        rows: Vec::new(),
        best: None,
        status: RunStatus::Running,
    };
    if let Some(dir) = &options.run_dir {
        for sub in ["checkpoints", "samples"] {
            std::fs::create_dir_all(dir.join(sub)).map_err(|e| TrainError::io(dir.join(sub), e))?;
        }
        std::fs::write(dir.join("config.json"), config.to_json()).map_err(|e| TrainError::io(dir.join("config.json"), e))?;
    }

    let mut run = Run {
        config,
        model: model.clone(),
        embedder,
        real_summary,
        dataset_len: images.len(),
        log,
        dir: options.run_dir.clone(),
        started: Instant::now(),
        step: 0,
        images_seen: 0,
        latent: ChaCha8Rng::seed_from_u64(config.seeds.latent),
        last_loss_d: None,
        last_loss_g: None,
        best_path: None,
    };
    drop(model);
    run.evaluate()?;

    let mut opt_d = make_optimizer::<T>(config);
    let mut opt_g = make_optimizer::<T>(config);
    let policy = (config.augmentation_probability > 0.0)
        .then(|| AugmentationPolicy::standard(config.augmentation_probability, config.seeds.data))
        .transpose()?;
    let mut aug_rng = latent_rng(config.seeds.data, u64::MAX);
    let eval_interval = (config.eval_every_kimg * 1000.0).round().max(1.0) as u64;
    let mut next_eval = eval_interval;
    let mut epoch = 0u64;
    let mut plan = batch_plan(images.len(), config.batch_size, config.seeds.data, epoch)?.into_iter();
    let mut streak = 0usize;
    let arch = run.model.arch.clone();
    let kind = arch.kind;
    let n_critic = config.n_critic() as u64;

    while run.images_seen < total_images {
        let idx = match plan.next() {
            Some(b) => b,
            None => {
                epoch += 1;
                plan = batch_plan(images.len(), config.batch_size, config.seeds.data, epoch)?.into_iter();
                plan.next().expect("non-empty dataset")
            }
        };
        let b = idx.len();
        let batch: Vec<PixelTensor> = match &policy {
            Some(p) => idx.iter().map(|&i| augment(&images[i], p, &mut aug_rng)).collect(),
            None => idx.iter().map(|&i| images[i].clone()).collect(),
        };
        let real = tensor_from_images::<T>(&batch.iter().collect::<Vec<_>>());
        let y = kind.is_conditional().then(|| {
            let l: Vec<ConditionLabel> = idx.iter().map(|&i| labels[i]).collect();
            Var::constant(one_hot::<T>(&l))
        });

        // critic update
        let z = Tensor::<T>::randn([b, arch.latent_dim], 1.0, &mut run.latent);
        let fake = no_grad(|| {
            let g = run.model.generator.bind(false);
            generator_forward(&arch, &g, &Var::constant(z), y.as_ref(), &mut RngNoise(&mut run.latent))
                .map(|v| v.value().clone())
        })?;
        let cb = run.model.critic.bind(true);
        let s_real = critic_forward(&arch, &cb, &Var::constant(real.clone()), y.as_ref())?;
        let s_fake = critic_forward(&arch, &cb, &Var::constant(fake.clone()), y.as_ref())?;
        let loss_d = match kind {
            ModelKind::Cgan | ModelKind::Stylegan2Lite => {
                adversarial_losses_from_logits(&s_real, &s_fake, config.generator_loss)?.0
            }
            ModelKind::Wgan => wasserstein_critic_loss(&s_real, &s_fake)?,
            ModelKind::WganGp => {
                let critic = |x: &Var<T>| critic_forward(&arch, &cb, x, y.as_ref());
                let gp = gradient_penalty(critic, &real, &fake, config.gp_lambda, &mut run.latent)?;
                wasserstein_critic_loss(&s_real, &s_fake)?.add(&gp)
            }
        };
        let grads = values(grad(&loss_d, &cb.vars(), false));
        opt_d.step(&mut run.model.critic, &grads);
        if kind == ModelKind::Wgan {
            clip_weights_in_place(&mut run.model.critic, config.clip_bound)?;
        }
        run.step += 1;
        run.images_seen += b as u64;
        run.last_loss_d = Some(loss_d.item().to_f64_lossy());
        if let Some(o) = options.observer.as_deref_mut() {
            o.on_critic_step(run.step, &run.model.critic);
        }

        // generator update
        if run.step % n_critic == 0 {
            let z = Var::constant(Tensor::<T>::randn([b, arch.latent_dim], 1.0, &mut run.latent));
            let gb = run.model.generator.bind(true);
            let fake = generator_forward(&arch, &gb, &z, y.as_ref(), &mut RngNoise(&mut run.latent))?;
            let cb = run.model.critic.bind(false);
            let s = critic_forward(&arch, &cb, &fake, y.as_ref())?;
            let loss_g = if kind.is_wasserstein() {
                wasserstein_generator_loss(&s)?
            } else {
                generator_loss_from_logits(&s, config.generator_loss)?
            };
            let grads = values(grad(&loss_g, &gb.vars(), false));
            opt_g.step(&mut run.model.generator, &grads);
            run.last_loss_g = Some(loss_g.item().to_f64_lossy());
            if let Some(o) = options.observer.as_deref_mut() {
                o.on_generator_step(run.step, &run.model.generator);
            }
        }

        let losses = [run.last_loss_d, run.last_loss_g];
        let reason = if losses.iter().flatten().any(|v| !v.is_finite()) {
            Some(format!("non-finite loss {losses:?}"))
        } else {
            if losses.iter().flatten().any(|v| v.abs() > config.divergence_threshold) {
                streak += 1;
            } else {
                streak = 0;
            }
            (streak >= config.divergence_patience)
                .then(|| format!("|loss| above {} for {streak} consecutive steps", config.divergence_threshold))
        };
        if let Some(reason) = reason {
            let step = run.step;
            run.log.status = RunStatus::Diverged { step, reason: reason.clone() };
            run.flush()?;
            let last_row = run.log.rows.last().cloned();
            return Err(TrainError::Diverged { step, reason, last_row, log: Box::new(run.log) });
        }

        let finished = run.images_seen >= total_images;
        if run.images_seen >= next_eval || finished {
            while next_eval <= run.images_seen {
                next_eval += eval_interval;
            }
            run.evaluate()?;
        } else if run.step % config.log_every_steps as u64 == 0 {
            run.row_mut();
        }
        if let (Some(o), Some(row)) = (options.observer.as_deref_mut(), run.log.rows.last()) {
            if row.step == run.step {
                o.on_row(row);
            }
        }
    }
    run.log.status = RunStatus::Completed;
    run.flush()?;
    Ok(TrainOutcome { log: run.log, model: run.model, best_checkpoint: run.best_path })
}
