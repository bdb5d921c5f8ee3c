use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{CorpusError, PixelTensor};

/// One augmentation with its parameter bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Transform {
    HorizontalFlip,
    /// Rotation by an angle drawn from `[-max_degrees, max_degrees]`.
    Rotation { max_degrees: f32 },
    /// Brightness and contrast scale factors drawn from `1 ± max`.
    BrightnessContrast { max_brightness: f32, max_contrast: f32 },
    /// Additive noise with standard deviation drawn from `[0, max_sigma]`.
    GaussianNoise { max_sigma: f32 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    HorizontalFlip,
    Rotation,
    BrightnessContrast,
    GaussianNoise,
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::HorizontalFlip => TransformKind::HorizontalFlip,
            Transform::Rotation { .. } => TransformKind::Rotation,
            Transform::BrightnessContrast { .. } => TransformKind::BrightnessContrast,
            Transform::GaussianNoise { .. } => TransformKind::GaussianNoise,
        }
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let check = |name: &str, v: f32, max: f32| {
            if v.is_finite() && v > 0.0 && v <= max {
                Ok(())
            } else {
                Err(CorpusError::InvalidPolicy(format!("{name} = {v} must lie in (0, {max}]")))
            }
        };
        match *self {
            Transform::HorizontalFlip => Ok(()),
            Transform::Rotation { max_degrees } => check("max_degrees", max_degrees, 45.0),
            Transform::BrightnessContrast { max_brightness, max_contrast } => {
                check("max_brightness", max_brightness, 0.5)?;
                check("max_contrast", max_contrast, 0.5)
            }
            Transform::GaussianNoise { max_sigma } => check("max_sigma", max_sigma, 0.25),
        }
    }

    fn apply<R: Rng + ?Sized>(&self, img: &PixelTensor, rng: &mut R) -> PixelTensor {
        let (h, w) = (img.height(), img.width());
        match *self {
            Transform::HorizontalFlip => {
                let mut data = Vec::with_capacity(h * w);
                for row in img.data().chunks(w) {
                    data.extend(row.iter().rev());
                }
                PixelTensor::from_clamped(h, w, data)
            }
            Transform::Rotation { max_degrees } => {
                let theta = rng.gen_range(-max_degrees..=max_degrees).to_radians();
                let (sin, cos) = theta.sin_cos();
                let (cy, cx) = ((h as f32 - 1.0) / 2.0, (w as f32 - 1.0) / 2.0);
                let mut data = Vec::with_capacity(h * w);
                for y in 0..h {
                    for x in 0..w {
                        // inverse map of the output pixel into the source
                        let (dy, dx) = (y as f32 - cy, x as f32 - cx);
                        let sx = cos * dx + sin * dy + cx;
                        let sy = -sin * dx + cos * dy + cy;
                        data.push(img.sample_bilinear(sy, sx));
                    }
                }
                PixelTensor::from_clamped(h, w, data)
            }
            Transform::BrightnessContrast { max_brightness, max_contrast } => {
                let b = 1.0 + rng.gen_range(-max_brightness..=max_brightness);
                let c = 1.0 + rng.gen_range(-max_contrast..=max_contrast);
                let mean = img.mean() as f32;
                let data = img.data().iter().map(|&v| ((v - mean) * c + mean + 1.0) * b - 1.0).collect();
                PixelTensor::from_clamped(h, w, data)
            }
            Transform::GaussianNoise { max_sigma } => {
                let sigma = rng.gen_range(0.0..=max_sigma);
                let data = img
                    .data()
                    .iter()
                    .map(|&v| {
                        let n: f32 = StandardNormal.sample(rng);
                        v + sigma * n
                    })
                    .collect();
                PixelTensor::from_clamped(h, w, data)
            }
        }
    }
}

/// Each transform is applied independently with probability
/// `occurrence_probability`, in list order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentationPolicy {
    pub occurrence_probability: f64,
    pub transforms: Vec<Transform>,
    pub rng_seed: u64,
}

impl AugmentationPolicy {
    pub fn new(occurrence_probability: f64, transforms: Vec<Transform>, rng_seed: u64) -> Result<Self, CorpusError> {
        let p = Self { occurrence_probability, transforms, rng_seed };
        p.validate()?;
        Ok(p)
    }

    /// Flip, ±5° rotation, ±10% brightness/contrast and noise up to σ = 0.02.
    pub fn standard(occurrence_probability: f64, rng_seed: u64) -> Result<Self, CorpusError> {
        Self::new(
            occurrence_probability,
            vec![
                Transform::HorizontalFlip,
                Transform::Rotation { max_degrees: 5.0 },
                Transform::BrightnessContrast { max_brightness: 0.1, max_contrast: 0.1 },
                Transform::GaussianNoise { max_sigma: 0.02 },
            ],
            rng_seed,
        )
    }

    pub fn identity() -> Self {
        Self { occurrence_probability: 0.0, transforms: Vec::new(), rng_seed: 0 }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let p = self.occurrence_probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(CorpusError::InvalidPolicy(format!("occurrence probability {p} outside [0, 1]")));
        }
        self.transforms.iter().try_for_each(Transform::validate)
    }
}

pub fn augment<R: Rng + ?Sized>(img: &PixelTensor, policy: &AugmentationPolicy, rng: &mut R) -> PixelTensor {
    augment_traced(img, policy, rng).0
}

/// [`augment`] plus the list of transforms that fired.
pub fn augment_traced<R: Rng + ?Sized>(
    img: &PixelTensor,
    policy: &AugmentationPolicy,
    rng: &mut R,
) -> (PixelTensor, Vec<TransformKind>) {
    let mut out = img.clone();
    let mut fired = Vec::new();
    for t in &policy.transforms {
        if rng.gen::<f64>() < policy.occurrence_probability {
            out = t.apply(&out, rng);
            fired.push(t.kind());
        }
    }
    (out, fired)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noise_image(seed: u64) -> PixelTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        PixelTensor::from_clamped(24, 32, (0..24 * 32).map(|_| rng.gen_range(-1.0..1.0)).collect())
    }

    #[test]
    fn zero_probability_is_identity() {
        let img = noise_image(1);
        let policy = AugmentationPolicy::standard(0.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            assert_eq!(augment(&img, &policy, &mut rng), img);
        }
    }

    #[test]
    fn outputs_stay_in_range_and_shape() {
        let img = noise_image(2);
        let policy = AugmentationPolicy::standard(1.0, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            let (out, fired) = augment_traced(&img, &policy, &mut rng);
            assert_eq!(fired.len(), 4);
            assert_eq!((out.height(), out.width()), (24, 32));
            assert!(out.data().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn flip_twice_is_identity() {
        let img = noise_image(5);
        let flip = AugmentationPolicy::new(1.0, vec![Transform::HorizontalFlip, Transform::HorizontalFlip], 0).unwrap();
        assert_eq!(augment(&img, &flip, &mut ChaCha8Rng::seed_from_u64(0)), img);
    }

    #[test]
    fn fraction_with_any_transform_matches_probability() {
        // P(at least one of k fires) = 1 - (1 - p)^k
        let img = PixelTensor::constant(4, 4, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [0.1, 0.3, 0.75] {
            let policy = AugmentationPolicy::standard(p, 0).unwrap();
            let n = 20_000;
            let hits = (0..n).filter(|_| !augment_traced(&img, &policy, &mut rng).1.is_empty()).count();
            let want = 1.0 - (1.0 - p).powi(4);
            let se = (want * (1.0 - want) / n as f64).sqrt();
            assert!((hits as f64 / n as f64 - want).abs() < 4.0 * se, "p={p}");
        }
    }

    #[test]
    fn invalid_policies() {
        assert!(AugmentationPolicy::standard(1.5, 0).is_err());
        assert!(AugmentationPolicy::new(0.5, vec![Transform::Rotation { max_degrees: 90.0 }], 0).is_err());
        assert!(AugmentationPolicy::new(0.5, vec![Transform::GaussianNoise { max_sigma: -0.1 }], 0).is_err());
    }
}
