use rand::Rng;
use spai_autograd::{no_grad, Bound, ParamSet, Scalar, Tensor, Var};

use super::{dcgan, stylegan};
use super::{one_hot, ArchDescriptor, ConditionLabel, GanError, GeneratorArch, LatentCode, NoiseSource};
use crate::corpus::PixelTensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Init {
    Normal(f64),
    Zeros,
    Ones,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: impl Into<Vec<usize>>, init: Init) -> Self {
        Self { name: name.into(), shape: shape.into(), init }
    }
}

fn materialize<T: Scalar, R: Rng + ?Sized>(specs: &[ParamSpec], rng: &mut R) -> ParamSet<T> {
    let mut set = ParamSet::new();
    for s in specs {
        let t = match s.init {
            Init::Normal(std) => Tensor::randn(s.shape.clone(), std, rng),
            Init::Zeros => Tensor::zeros(s.shape.clone()),
            Init::Ones => Tensor::ones(s.shape.clone()),
        };
        set.insert(s.name.clone(), t);
    }
    set
}

fn check_layout<T: Scalar>(what: &str, set: &ParamSet<T>, specs: &[ParamSpec]) -> Result<(), GanError> {
    let names: Vec<&str> = set.names().collect();
    let want: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    if names != want {
        return Err(GanError::Shape(format!("{what} parameter names {names:?} differ from layout {want:?}")));
    }
    for s in specs {
        let got = set.get(&s.name).expect("name checked").shape();
        if got != s.shape.as_slice() {
            return Err(GanError::Shape(format!("{what} parameter {} is {got:?}, expected {:?}", s.name, s.shape)));
        }
    }
    Ok(())
}

impl ArchDescriptor {
    pub(crate) fn generator_layout(&self) -> Vec<ParamSpec> {
        match self.generator {
            GeneratorArch::Dcgan { .. } => dcgan::generator_layout(self),
            GeneratorArch::Style { .. } => stylegan::generator_layout(self),
        }
    }

    pub(crate) fn critic_layout(&self) -> Vec<ParamSpec> {
        dcgan::critic_layout(self)
    }
}

fn check_condition<T: Scalar>(arch: &ArchDescriptor, batch: usize, y: Option<&Var<T>>) -> Result<(), GanError> {
    match (arch.kind.is_conditional(), y) {
        (true, None) => Err(GanError::Conditioning(format!("{} requires a condition label", arch.kind))),
        (false, Some(_)) => Err(GanError::Conditioning(format!("{} takes no condition label", arch.kind))),
        (true, Some(y)) if y.shape() != [batch, arch.n_classes] => {
            Err(GanError::Shape(format!("condition {:?}, expected [{batch}, {}]", y.shape(), arch.n_classes)))
        }
        _ => Ok(()),
    }
}

/// Generator `G(z[, y])`: `z` is `[B, latent_dim]`, `y` one-hot `[B, 2]`.
/// Returns images `[B, 1, H, W]` in `[-1, 1]`.
pub fn generator_forward<T: Scalar>(
    arch: &ArchDescriptor,
    g: &Bound<T>,
    z: &Var<T>,
    y: Option<&Var<T>>,
    noise: &mut dyn NoiseSource<T>,
) -> Result<Var<T>, GanError> {
    if z.shape().len() != 2 || z.shape()[1] != arch.latent_dim {
        return Err(GanError::Shape(format!("latent {:?}, expected [B, {}]", z.shape(), arch.latent_dim)));
    }
    if z.shape()[0] == 0 {
        return Err(GanError::EmptyBatch);
    }
    check_condition(arch, z.shape()[0], y)?;
    match arch.generator {
        GeneratorArch::Dcgan { .. } => dcgan::generator_forward(arch, g, z, y),
        GeneratorArch::Style { .. } => stylegan::generator_forward(arch, g, z, noise),
    }
}

/// Style mapping network `z [B, 512] -> w [B, 512]`.
pub fn mapping_forward<T: Scalar>(arch: &ArchDescriptor, g: &Bound<T>, z: &Var<T>) -> Result<Var<T>, GanError> {
    let Some(first) = arch.mapping_layers().first() else {
        return Err(GanError::InvalidArchitecture(format!("{} has no mapping network", arch.kind)));
    };
    if z.shape().len() != 2 || z.shape()[1] != first.in_features {
        return Err(GanError::Shape(format!("mapping input {:?}, expected [B, {}]", z.shape(), first.in_features)));
    }
    stylegan::mapping_forward(arch, g, z)
}

/// Critic / discriminator raw scores `[B]` (logits for the cGAN and style
/// models, unbounded Wasserstein scores otherwise).
pub fn critic_forward<T: Scalar>(
    arch: &ArchDescriptor,
    d: &Bound<T>,
    x: &Var<T>,
    y: Option<&Var<T>>,
) -> Result<Var<T>, GanError> {
    let s = arch.image_size;
    if x.shape().len() != 4 || x.shape()[1..] != [1, s.height, s.width] {
        return Err(GanError::Shape(format!("critic input {:?}, expected [B, 1, {}, {}]", x.shape(), s.height, s.width)));
    }
    if x.shape()[0] == 0 {
        return Err(GanError::EmptyBatch);
    }
    check_condition(arch, x.shape()[0], y)?;
    dcgan::critic_forward(arch, d, x, y)
}

/// A generator / critic pair with its architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct GanModel<T: Scalar> {
    pub arch: ArchDescriptor,
    pub generator: ParamSet<T>,
    pub critic: ParamSet<T>,
}

impl<T: Scalar> GanModel<T> {
    pub fn new<R: Rng + ?Sized>(arch: ArchDescriptor, rng: &mut R) -> Self {
        let generator = materialize(&arch.generator_layout(), rng);
        let critic = materialize(&arch.critic_layout(), rng);
        Self { arch, generator, critic }
    }

    /// Assembles a model from stored parameters, checking them against the
    /// architecture.
    pub fn from_parts(arch: ArchDescriptor, generator: ParamSet<T>, critic: ParamSet<T>) -> Result<Self, GanError> {
        check_layout("generator", &generator, &arch.generator_layout())?;
        check_layout("critic", &critic, &arch.critic_layout())?;
        Ok(Self { arch, generator, critic })
    }

    fn condition(&self, labels: Option<&[ConditionLabel]>) -> Option<Var<T>> {
        labels.map(|l| Var::constant(one_hot(l)))
    }

    /// Images `[B, 1, H, W]` without recording a graph.
    pub fn generate(
        &self,
        z: &Tensor<T>,
        labels: Option<&[ConditionLabel]>,
        noise: &mut dyn NoiseSource<T>,
    ) -> Result<Tensor<T>, GanError> {
        no_grad(|| {
            let g = self.generator.bind(false);
            let y = self.condition(labels);
            generator_forward(&self.arch, &g, &Var::constant(z.clone()), y.as_ref(), noise).map(|v| v.value().clone())
        })
    }

    /// Critic scores `[B]` without recording a graph.
    pub fn score(&self, x: &Tensor<T>, labels: Option<&[ConditionLabel]>) -> Result<Tensor<T>, GanError> {
        no_grad(|| {
            let d = self.critic.bind(false);
            let y = self.condition(labels);
            critic_forward(&self.arch, &d, &Var::constant(x.clone()), y.as_ref()).map(|v| v.value().clone())
        })
    }

    pub fn synthesize(
        &self,
        codes: &[LatentCode<T>],
        labels: Option<&[ConditionLabel]>,
        noise: &mut dyn NoiseSource<T>,
    ) -> Result<Vec<PixelTensor>, GanError> {
        let z = super::latent_tensor(codes)?;
        Ok(images_from_tensor(&self.generate(&z, labels, noise)?))
    }
}

/// Split `[B, 1, H, W]` into images, clamping into `[-1, 1]`.
pub(crate) fn images_from_tensor<T: Scalar>(t: &Tensor<T>) -> Vec<PixelTensor> {
    let s = t.shape();
    let (h, w) = (s[2], s[3]);
    t.data()
        .chunks(h * w)
        .map(|c| PixelTensor::from_clamped(h, w, c.iter().map(|v| v.to_f64_lossy() as f32).collect()))
        .collect()
}

/// Stack images into `[B, 1, H, W]`.
pub(crate) fn tensor_from_images<T: Scalar>(images: &[&PixelTensor]) -> Tensor<T> {
    let (h, w) = (images[0].height(), images[0].width());
    let mut data = Vec::with_capacity(images.len() * h * w);
    for img in images {
        assert_eq!((img.height(), img.width()), (h, w), "mixed image sizes in one batch");
        data.extend(img.data().iter().map(|&v| T::of(v as f64)));
    }
    Tensor::new([images.len(), 1, h, w], data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ganzoo::{sample_latent, ImageSize, ModelKind, ZeroNoise};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(kind: ModelKind, size: ImageSize) -> GanModel<f32> {
        let arch = ArchDescriptor::new(kind, size, kind.default_latent_dim(), 8, 32).unwrap();
        GanModel::new(arch, &mut ChaCha8Rng::seed_from_u64(1))
    }

    #[test]
    fn forward_shapes_for_every_kind() {
        for (kind, size) in [
            (ModelKind::Cgan, ImageSize::new(80, 60)),
            (ModelKind::Wgan, ImageSize::new(32, 32)),
            (ModelKind::WganGp, ImageSize::new(40, 24)),
            (ModelKind::Stylegan2Lite, ImageSize::new(16, 16)),
        ] {
            let m = model(kind, size);
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let z = latent_tensor_of(&m, 3, &mut rng);
            let labels = kind.is_conditional().then_some(&[ConditionLabel::Female, ConditionLabel::Male, ConditionLabel::Male][..]);
            let imgs = m.generate(&z, labels, &mut ZeroNoise).unwrap();
            assert_eq!(imgs.shape(), &[3, 1, size.height, size.width], "{kind}");
            assert!(imgs.data().iter().all(|v| v.abs() <= 1.0));
            let scores = m.score(&imgs, labels).unwrap();
            assert_eq!(scores.shape(), &[3]);
        }
    }

    fn latent_tensor_of(m: &GanModel<f32>, n: usize, rng: &mut ChaCha8Rng) -> Tensor<f32> {
        crate::ganzoo::latent_tensor(&sample_latent(rng, n, m.arch.latent_dim)).unwrap()
    }

    #[test]
    fn conditioning_must_match_kind() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = model(ModelKind::Cgan, ImageSize::new(16, 16));
        let z = latent_tensor_of(&c, 2, &mut rng);
        assert!(matches!(c.generate(&z, None, &mut ZeroNoise), Err(GanError::Conditioning(_))));
        let w = model(ModelKind::Wgan, ImageSize::new(16, 16));
        let labels = [ConditionLabel::Male; 2];
        assert!(matches!(w.generate(&z, Some(&labels), &mut ZeroNoise), Err(GanError::Conditioning(_))));
        let bad = Tensor::zeros([2, 7]);
        assert!(matches!(w.generate(&bad, None, &mut ZeroNoise), Err(GanError::Shape(_))));
    }

    #[test]
    fn from_parts_checks_layout() {
        let m = model(ModelKind::WganGp, ImageSize::new(16, 16));
        assert!(GanModel::from_parts(m.arch.clone(), m.generator.clone(), m.critic.clone()).is_ok());
        assert!(GanModel::from_parts(m.arch.clone(), m.critic.clone(), m.generator.clone()).is_err());
    }

    #[test]
    fn images_are_independent_of_batch_companions() {
        // no batch statistics: image i depends only on z_i
        let m = model(ModelKind::WganGp, ImageSize::new(16, 16));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = latent_tensor_of(&m, 4, &mut rng);
        let all = m.generate(&z, None, &mut ZeroNoise).unwrap();
        let first = m.generate(&z.reshape([4, 128]).clone(), None, &mut ZeroNoise).unwrap();
        assert_eq!(all, first);
        let one = Tensor::new([1, 128], z.data()[..128].to_vec());
        let single = m.generate(&one, None, &mut ZeroNoise).unwrap();
        for (a, b) in single.data().iter().zip(&all.data()[..256]) {
            assert!((a - b).abs() < 1e-5);
        }
    }
}
