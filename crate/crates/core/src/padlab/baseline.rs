use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use spai_autograd::optim::{Adam, Optimizer};
use spai_autograd::{grad, nn, no_grad, ParamSet, Scalar, Tensor, Var};

use super::{PadClassifier, PadError};
use crate::archive;
use crate::corpus::{resize, PixelTensor};

pub const BASELINE_KIND: &str = "pad-baseline-cnn";

/// Attack species synthesized from bona fide images.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// Reduced contrast, halftone dot screen, slight blur and print grain.
    Print,
    /// Additive sensor-like Gaussian noise.
    Noise,
}

fn box_blur(img: &PixelTensor) -> Vec<f32> {
    let (h, w) = (img.height(), img.width());
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut n = 0.0;
            for yy in y.saturating_sub(1)..(y + 2).min(h) {
                for xx in x.saturating_sub(1)..(x + 2).min(w) {
                    acc += img.get(yy, xx);
                    n += 1.0;
                }
            }
            out[y * w + x] = acc / n;
        }
    }
    out
}

pub fn synthesize_attack<R: Rng + ?Sized>(img: &PixelTensor, kind: AttackKind, rng: &mut R) -> PixelTensor {
    let (h, w) = (img.height(), img.width());
    match kind {
        AttackKind::Print => {
            let contrast = rng.gen_range(0.5..0.8f32);
            let offset = rng.gen_range(-0.1..0.2f32);
            let period = rng.gen_range(2.5..4.0f32);
            let amp = rng.gen_range(0.1..0.2f32);
            let grain = Normal::new(0.0, 0.03f32).expect("valid sigma");
            let blurred = box_blur(img);
            let tau = std::f32::consts::TAU;
            let data = blurred
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    let (y, x) = ((i / w) as f32, (i % w) as f32);
                    let screen = (tau * x / period).cos() * (tau * y / period).cos();
                    v * contrast + offset + amp * screen + grain.sample(rng)
                })
                .collect();
            PixelTensor::from_clamped(h, w, data)
        }
        AttackKind::Noise => {
            let sigma = rng.gen_range(0.1..0.25f32);
            let noise = Normal::new(0.0, sigma).expect("valid sigma");
            PixelTensor::from_clamped(h, w, img.data().iter().map(|&v| v + noise.sample(rng)).collect())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    pub input_side: usize,
    pub channels: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self { input_side: 32, channels: 8, epochs: 30, batch_size: 16, learning_rate: 3e-3, seed: 0 }
    }
}

/// Three 3×3 conv layers with average pooling, global pooling and a linear
/// read-out; the logit is squashed to a bona fide probability.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineCnn<T: Scalar> {
    pub config: BaselineConfig,
    pub params: ParamSet<T>,
}

impl<T: Scalar> BaselineCnn<T> {
    pub fn new(config: BaselineConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let c = config.channels;
        let mut params = ParamSet::new();
        let mut conv = |name: &str, cout: usize, cin: usize| {
            let std = (2.0 / (cin * 9) as f64).sqrt();
            params.insert(format!("{name}.weight"), Tensor::randn([cout, cin, 3, 3], std, &mut rng));
            params.insert(format!("{name}.bias"), Tensor::zeros([cout]));
        };
        conv("conv0", c, 1);
        conv("conv1", 2 * c, c);
        conv("conv2", 2 * c, 2 * c);
        params.insert("fc.weight", Tensor::randn([1, 2 * c], (1.0 / (2 * c) as f64).sqrt(), &mut rng));
        params.insert("fc.bias", Tensor::zeros([1]));
        Self { config, params }
    }

    fn input(&self, images: &[&PixelTensor]) -> Result<Tensor<T>, PadError> {
        let s = self.config.input_side;
        let mut data = Vec::with_capacity(images.len() * s * s);
        for img in images {
            let fitted = resize(img, (s, s))?;
            data.extend(fitted.data().iter().map(|&v| T::of(v as f64)));
        }
        Ok(Tensor::new([images.len(), 1, s, s], data))
    }

    fn logits(params: &spai_autograd::Bound<T>, x: &Var<T>) -> Var<T> {
        let slope = T::of(0.2);
        let mut h = x.clone();
        for (i, name) in ["conv0", "conv1", "conv2"].iter().enumerate() {
            h = nn::conv2d(&h, params.get(&format!("{name}.weight")), Some(params.get(&format!("{name}.bias"))), (1, 1), (1, 1))
                .leaky_relu(slope);
            if i < 2 {
                h = h.avg_pool2d((2, 2), (2, 2), (0, 0), true);
            }
        }
        let b = h.shape()[0];
        nn::linear(&nn::global_avg_pool(&h), params.get("fc.weight"), Some(params.get("fc.bias"))).reshape([b])
    }

    /// Trains on `bonafide` against print and noise attacks synthesized from
    /// the same images, alternating species.
    pub fn train(bonafide: &[PixelTensor], config: BaselineConfig) -> Result<Self, PadError> {
        if bonafide.is_empty() {
            return Err(PadError::Classifier("no bona fide training images".into()));
        }
        let mut model = Self::new(config.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
        let mut items: Vec<(PixelTensor, f64)> = Vec::with_capacity(2 * bonafide.len());
        for (i, img) in bonafide.iter().enumerate() {
            let kind = if i % 2 == 0 { AttackKind::Print } else { AttackKind::Noise };
            items.push((img.clone(), 1.0));
            items.push((synthesize_attack(img, kind, &mut rng), 0.0));
        }
        let inputs: Vec<Tensor<T>> = items
            .iter()
            .map(|(img, _)| model.input(&[img]))
            .collect::<Result<_, _>>()?;
        let mut opt = Adam::new(config.learning_rate, 0.9, 0.999);
        let s = config.input_side;
        for epoch in 0..config.epochs {
            let plan = crate::corpus::batch_plan(items.len(), config.batch_size.max(1), config.seed, epoch as u64)?;
            for batch in plan {
                let mut data = Vec::with_capacity(batch.len() * s * s);
                for &i in &batch {
                    data.extend_from_slice(inputs[i].data());
                }
                let x = Var::constant(Tensor::new([batch.len(), 1, s, s], data));
                // softplus(-l) for bona fide targets, softplus(l) for attacks
                let sign = Tensor::from_fn([batch.len()], |k| T::of(1.0 - 2.0 * items[batch[k]].1));
                let bound = model.params.bind(true);
                let loss = Self::logits(&bound, &x).mul(&Var::constant(sign)).softplus().mean();
                let grads: Vec<Tensor<T>> = grad(&loss, &bound.vars(), false).into_iter().map(|g| g.value().clone()).collect();
                opt.step(&mut model.params, &grads);
            }
        }
        Ok(model)
    }

    /// Bona fide probabilities, one per image.
    pub fn predict(&self, images: &[&PixelTensor]) -> Result<Vec<f64>, PadError> {
        let x = self.input(images)?;
        Ok(no_grad(|| {
            let bound = self.params.bind(false);
            Self::logits(&bound, &Var::constant(x)).sigmoid().value().to_f64_vec()
        }))
    }

    pub fn save(&self, path: &Path) -> Result<String, PadError> {
        Ok(archive::write(path, BASELINE_KIND, &self.config, &[("pad", &self.params)])?)
    }

    pub fn load(path: &Path) -> Result<Self, PadError> {
        let mut a: archive::Archive<BaselineConfig, T> = archive::read(path)?;
        if a.kind != BASELINE_KIND {
            return Err(PadError::Classifier(format!("{} is a {:?} archive", path.display(), a.kind)));
        }
        let params = a.take_group("pad").ok_or_else(|| PadError::Classifier("archive lacks pad parameters".into()))?;
        let reference = Self::new(a.meta.clone());
        let same_layout = reference.params.len() == params.len()
            && reference.params.iter().zip(params.iter()).all(|((n1, t1), (n2, t2))| n1 == n2 && t1.shape() == t2.shape());
        if !same_layout {
            return Err(PadError::Classifier("parameter layout does not match the stored config".into()));
        }
        Ok(Self { config: a.meta, params })
    }
}

impl<T: Scalar> PadClassifier for BaselineCnn<T> {
    fn id(&self) -> String {
        format!("baseline:{}", BASELINE_KIND)
    }

    fn score(&self, _: &str, image: &PixelTensor) -> Result<f64, PadError> {
        Ok(self.predict(&[image])?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attacks_stay_in_range_and_differ() {
        let img = PixelTensor::constant(20, 30, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for kind in [AttackKind::Print, AttackKind::Noise] {
            let a = synthesize_attack(&img, kind, &mut rng);
            assert_eq!((a.height(), a.width()), (20, 30));
            assert!(a.data().iter().all(|v| (-1.0..=1.0).contains(v)));
            assert_ne!(a, img);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = BaselineCnn::<f32>::new(BaselineConfig { channels: 4, ..Default::default() });
        let path = dir.path().join("pad.bin");
        m.save(&path).unwrap();
        let back = BaselineCnn::<f32>::load(&path).unwrap();
        assert_eq!(back, m);
        let img = PixelTensor::constant(10, 10, 0.1);
        let s = back.score("x", &img).unwrap();
        assert!((0.0..=1.0).contains(&s));
        assert_eq!(s, m.score("x", &img).unwrap());
    }
}
