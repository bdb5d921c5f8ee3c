use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spai_autograd::{Scalar, Tensor};

/// Supplies per-layer noise images `[B, 1, H, W]` to the style generator.
pub trait NoiseSource<T: Scalar> {
    fn noise(&mut self, batch: usize, height: usize, width: usize) -> Tensor<T>;
}

/// All-zero noise: the deterministic "mean" image.
pub struct ZeroNoise;

impl<T: Scalar> NoiseSource<T> for ZeroNoise {
    fn noise(&mut self, batch: usize, height: usize, width: usize) -> Tensor<T> {
        Tensor::zeros([batch, 1, height, width])
    }
}

/// One generator shared by the whole batch.
pub struct RngNoise<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<T: Scalar, R: Rng + ?Sized> NoiseSource<T> for RngNoise<'_, R> {
    fn noise(&mut self, batch: usize, height: usize, width: usize) -> Tensor<T> {
        Tensor::randn([batch, 1, height, width], 1.0, self.0)
    }
}

/// One generator per batch row, so each image's noise depends only on its
/// own stream.
pub struct PerSampleNoise(pub Vec<ChaCha8Rng>);

impl<T: Scalar> NoiseSource<T> for PerSampleNoise {
    fn noise(&mut self, batch: usize, height: usize, width: usize) -> Tensor<T> {
        assert_eq!(batch, self.0.len(), "one noise stream per sample");
        let mut data = Vec::with_capacity(batch * height * width);
        for rng in &mut self.0 {
            for _ in 0..height * width {
                let v: f64 = StandardNormal.sample(rng);
                data.push(T::of(v));
            }
        }
        Tensor::new([batch, 1, height, width], data)
    }
}
