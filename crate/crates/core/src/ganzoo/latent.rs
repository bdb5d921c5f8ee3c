use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spai_autograd::{Scalar, Tensor};

use super::{ConditionLabel, GanError};

/// One latent vector `z ~ N(0, I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentCode<T>(pub Vec<T>);

impl<T> LatentCode<T> {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn sample_latent<T: Scalar, R: Rng + ?Sized>(rng: &mut R, n: usize, d_z: usize) -> Vec<LatentCode<T>> {
    (0..n)
        .map(|_| {
            LatentCode(
                (0..d_z)
                    .map(|_| {
                        let v: f64 = StandardNormal.sample(rng);
                        T::of(v)
                    })
                    .collect(),
            )
        })
        .collect()
}

/// The generator for image `index` of a run seeded by `seed`; any image can
/// be regenerated from the pair alone.
pub fn latent_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stack codes into `[n, d]`.
pub fn latent_tensor<T: Scalar>(codes: &[LatentCode<T>]) -> Result<Tensor<T>, GanError> {
    let d = codes.first().map(LatentCode::dim).ok_or(GanError::EmptyBatch)?;
    if codes.iter().any(|c| c.dim() != d) {
        return Err(GanError::Shape("latent codes of differing dimension".into()));
    }
    Ok(Tensor::new([codes.len(), d], codes.iter().flat_map(|c| c.0.iter().copied()).collect()))
}

/// `[n, 2]` one-hot rows.
pub fn one_hot<T: Scalar>(labels: &[ConditionLabel]) -> Tensor<T> {
    let k = ConditionLabel::COUNT;
    Tensor::from_fn([labels.len(), k], |i| if labels[i / k].index() == i % k { T::one() } else { T::zero() })
}
