//! Inception-v3 pool3 features (2048-d) in the variant used by the common
//! FID reference code: average-pool branches exclude padding, the last
//! block max-pools. Weights come from a safetensors file with torchvision
//! parameter names; batch norms (eps 1e-3) are folded into the convolutions.

use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safetensors::{Dtype, SafeTensors};
use sha2::{Digest, Sha256};
use spai_autograd::{nn, no_grad, ParamSet, Tensor, Var};

use super::embed::input_tensor;
use super::{EmbeddingModel, QualityError};
use crate::corpus::PixelTensor;

const INPUT_SIDE: usize = 299;
const BN_EPS: f32 = 1e-3;
pub const INCEPTION_DIM: usize = 2048;

/// `(name, in, out, (kh, kw), stride, (ph, pw))` for every conv unit.
fn conv_units() -> Vec<(String, usize, usize, (usize, usize), usize, (usize, usize))> {
    let mut u = Vec::new();
    let mut add = |n: &str, i: usize, o: usize, k: (usize, usize), s: usize, p: (usize, usize)| {
        u.push((n.to_string(), i, o, k, s, p));
    };
    add("Conv2d_1a_3x3", 3, 32, (3, 3), 2, (0, 0));
    add("Conv2d_2a_3x3", 32, 32, (3, 3), 1, (0, 0));
    add("Conv2d_2b_3x3", 32, 64, (3, 3), 1, (1, 1));
    add("Conv2d_3b_1x1", 64, 80, (1, 1), 1, (0, 0));
    add("Conv2d_4a_3x3", 80, 192, (3, 3), 1, (0, 0));
    for (name, cin, pool) in [("Mixed_5b", 192, 32), ("Mixed_5c", 256, 64), ("Mixed_5d", 288, 64)] {
        add(&format!("{name}.branch1x1"), cin, 64, (1, 1), 1, (0, 0));
        add(&format!("{name}.branch5x5_1"), cin, 48, (1, 1), 1, (0, 0));
        add(&format!("{name}.branch5x5_2"), 48, 64, (5, 5), 1, (2, 2));
        add(&format!("{name}.branch3x3dbl_1"), cin, 64, (1, 1), 1, (0, 0));
        add(&format!("{name}.branch3x3dbl_2"), 64, 96, (3, 3), 1, (1, 1));
        add(&format!("{name}.branch3x3dbl_3"), 96, 96, (3, 3), 1, (1, 1));
        add(&format!("{name}.branch_pool"), cin, pool, (1, 1), 1, (0, 0));
    }
    add("Mixed_6a.branch3x3", 288, 384, (3, 3), 2, (0, 0));
    add("Mixed_6a.branch3x3dbl_1", 288, 64, (1, 1), 1, (0, 0));
    add("Mixed_6a.branch3x3dbl_2", 64, 96, (3, 3), 1, (1, 1));
    add("Mixed_6a.branch3x3dbl_3", 96, 96, (3, 3), 2, (0, 0));
    for (name, c7) in [("Mixed_6b", 128), ("Mixed_6c", 160), ("Mixed_6d", 160), ("Mixed_6e", 192)] {
        add(&format!("{name}.branch1x1"), 768, 192, (1, 1), 1, (0, 0));
        add(&format!("{name}.branch7x7_1"), 768, c7, (1, 1), 1, (0, 0));
        add(&format!("{name}.branch7x7_2"), c7, c7, (1, 7), 1, (0, 3));
        add(&format!("{name}.branch7x7_3"), c7, 192, (7, 1), 1, (3, 0));
        add(&format!("{name}.branch7x7dbl_1"), 768, c7, (1, 1), 1, (0, 0));
        add(&format!("{name}.branch7x7dbl_2"), c7, c7, (7, 1), 1, (3, 0));
        add(&format!("{name}.branch7x7dbl_3"), c7, c7, (1, 7), 1, (0, 3));
        add(&format!("{name}.branch7x7dbl_4"), c7, c7, (7, 1), 1, (3, 0));
        add(&format!("{name}.branch7x7dbl_5"), c7, 192, (1, 7), 1, (0, 3));
        add(&format!("{name}.branch_pool"), 768, 192, (1, 1), 1, (0, 0));
    }
    add("Mixed_7a.branch3x3_1", 768, 192, (1, 1), 1, (0, 0));
    add("Mixed_7a.branch3x3_2", 192, 320, (3, 3), 2, (0, 0));
    add("Mixed_7a.branch7x7x3_1", 768, 192, (1, 1), 1, (0, 0));
    add("Mixed_7a.branch7x7x3_2", 192, 192, (1, 7), 1, (0, 3));
    add("Mixed_7a.branch7x7x3_3", 192, 192, (7, 1), 1, (3, 0));
    add("Mixed_7a.branch7x7x3_4", 192, 192, (3, 3), 2, (0, 0));
    for (name, cin) in [("Mixed_7b", 1280), ("Mixed_7c", 2048)] {
        add(&format!("{name}.branch1x1"), cin, 320, (1, 1), 1, (0, 0));
        add(&format!("{name}.branch3x3_1"), cin, 384, (1, 1), 1, (0, 0));
        add(&format!("{name}.branch3x3_2a"), 384, 384, (1, 3), 1, (0, 1));
        add(&format!("{name}.branch3x3_2b"), 384, 384, (3, 1), 1, (1, 0));
        add(&format!("{name}.branch3x3dbl_1"), cin, 448, (1, 1), 1, (0, 0));
        add(&format!("{name}.branch3x3dbl_2"), 448, 384, (3, 3), 1, (1, 1));
        add(&format!("{name}.branch3x3dbl_3a"), 384, 384, (1, 3), 1, (0, 1));
        add(&format!("{name}.branch3x3dbl_3b"), 384, 384, (3, 1), 1, (1, 0));
        add(&format!("{name}.branch_pool"), cin, 192, (1, 1), 1, (0, 0));
    }
    u
}

pub struct InceptionV3 {
    /// Folded `{unit}.weight` / `{unit}.bias` per conv unit.
    params: ParamSet<f32>,
    units: std::collections::HashMap<String, (usize, (usize, usize))>,
    weights_digest: String,
}

fn read_f32(st: &SafeTensors<'_>, name: &str, shape: &[usize]) -> Result<Vec<f32>, QualityError> {
    let t = st.tensor(name).map_err(|e| QualityError::Weights(format!("{name}: {e}")))?;
    if t.shape() != shape {
        return Err(QualityError::Weights(format!("{name} has shape {:?}, expected {shape:?}", t.shape())));
    }
    let bytes = t.data();
    match t.dtype() {
        Dtype::F32 => Ok(bytes.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect()),
        Dtype::F64 => Ok(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap()) as f32).collect()),
        other => Err(QualityError::Weights(format!("{name}: unsupported dtype {other:?}"))),
    }
}

impl InceptionV3 {
    /// Loads `{unit}.conv.weight` and `{unit}.bn.{weight,bias,running_mean,running_var}`.
    pub fn from_safetensors(path: &Path) -> Result<Self, QualityError> {
        let bytes = std::fs::read(path).map_err(|e| QualityError::Io { path: path.into(), source: e })?;
        Self::from_safetensors_bytes(&bytes)
    }

    pub fn from_safetensors_bytes(bytes: &[u8]) -> Result<Self, QualityError> {
        let st = SafeTensors::deserialize(bytes).map_err(|e| QualityError::Weights(e.to_string()))?;
        let mut params = ParamSet::new();
        let mut units = std::collections::HashMap::new();
        for (name, cin, cout, k, stride, pad) in conv_units() {
            let w = read_f32(&st, &format!("{name}.conv.weight"), &[cout, cin, k.0, k.1])?;
            let gamma = read_f32(&st, &format!("{name}.bn.weight"), &[cout])?;
            let beta = read_f32(&st, &format!("{name}.bn.bias"), &[cout])?;
            let mean = read_f32(&st, &format!("{name}.bn.running_mean"), &[cout])?;
            let var = read_f32(&st, &format!("{name}.bn.running_var"), &[cout])?;
            let per = cin * k.0 * k.1;
            let mut wf = w;
            let mut bias = vec![0.0f32; cout];
            for o in 0..cout {
                let scale = gamma[o] / (var[o] + BN_EPS).sqrt();
                wf[o * per..(o + 1) * per].iter_mut().for_each(|v| *v *= scale);
                bias[o] = beta[o] - mean[o] * scale;
            }
            params.insert(format!("{name}.weight"), Tensor::new([cout, cin, k.0, k.1], wf));
            params.insert(format!("{name}.bias"), Tensor::new([cout], bias));
            units.insert(name, (stride, pad));
        }
        Ok(Self { params, units, weights_digest: hex::encode(Sha256::digest(bytes))[..12].to_string() })
    }

    /// He-initialized weights with identity batch norms, serialized as a
    /// safetensors file (for tests and dry runs).
    pub fn random_safetensors(seed: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut owned: Vec<(String, Vec<usize>, Vec<u8>)> = Vec::new();
        let bytes = |v: &[f32]| v.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>();
        for (name, cin, cout, k, _, _) in conv_units() {
            let fan_in = (cin * k.0 * k.1) as f64;
            let w = Tensor::<f32>::randn([cout, cin, k.0, k.1], (2.0 / fan_in).sqrt(), &mut rng);
            owned.push((format!("{name}.conv.weight"), w.shape().to_vec(), bytes(w.data())));
            for (suffix, v) in [("weight", 1.0f32), ("bias", 0.0), ("running_mean", 0.0), ("running_var", 1.0 - BN_EPS)] {
                owned.push((format!("{name}.bn.{suffix}"), vec![cout], bytes(&vec![v; cout])));
            }
        }
        let views: Vec<(String, safetensors::tensor::TensorView<'_>)> = owned
            .iter()
            .map(|(n, s, d)| (n.clone(), safetensors::tensor::TensorView::new(Dtype::F32, s.clone(), d).expect("valid view")))
            .collect();
        safetensors::serialize(views, &None).expect("serialize")
    }

    fn unit(&self, name: &str, x: &Var<f32>) -> Var<f32> {
        let (stride, pad) = self.units[name];
        let w = Var::constant(self.params.get(&format!("{name}.weight")).expect("unit weight").clone());
        let b = Var::constant(self.params.get(&format!("{name}.bias")).expect("unit bias").clone());
        nn::conv2d(x, &w, Some(&b), (stride, stride), pad).relu()
    }

    fn chain(&self, names: &[String], x: &Var<f32>) -> Var<f32> {
        names.iter().fold(x.clone(), |h, n| self.unit(n, &h))
    }

    fn block_a(&self, m: &str, x: &Var<f32>) -> Var<f32> {
        let n = |s: &str| format!("{m}.{s}");
        let b1 = self.unit(&n("branch1x1"), x);
        let b5 = self.chain(&[n("branch5x5_1"), n("branch5x5_2")], x);
        let b3 = self.chain(&[n("branch3x3dbl_1"), n("branch3x3dbl_2"), n("branch3x3dbl_3")], x);
        let bp = self.unit(&n("branch_pool"), &x.avg_pool2d((3, 3), (1, 1), (1, 1), false));
        Var::concat(&[b1, b5, b3, bp], 1)
    }

    fn block_b(&self, x: &Var<f32>) -> Var<f32> {
        let b3 = self.unit("Mixed_6a.branch3x3", x);
        let names: Vec<String> = (1..=3).map(|i| format!("Mixed_6a.branch3x3dbl_{i}")).collect();
        let bd = self.chain(&names, x);
        let bp = x.max_pool2d((3, 3), (2, 2), (0, 0));
        Var::concat(&[b3, bd, bp], 1)
    }

    fn block_c(&self, m: &str, x: &Var<f32>) -> Var<f32> {
        let b1 = self.unit(&format!("{m}.branch1x1"), x);
        let b7: Vec<String> = (1..=3).map(|i| format!("{m}.branch7x7_{i}")).collect();
        let bd: Vec<String> = (1..=5).map(|i| format!("{m}.branch7x7dbl_{i}")).collect();
        let bp = self.unit(&format!("{m}.branch_pool"), &x.avg_pool2d((3, 3), (1, 1), (1, 1), false));
        Var::concat(&[b1, self.chain(&b7, x), self.chain(&bd, x), bp], 1)
    }

    fn block_d(&self, x: &Var<f32>) -> Var<f32> {
        let b3: Vec<String> = (1..=2).map(|i| format!("Mixed_7a.branch3x3_{i}")).collect();
        let b7: Vec<String> = (1..=4).map(|i| format!("Mixed_7a.branch7x7x3_{i}")).collect();
        let bp = x.max_pool2d((3, 3), (2, 2), (0, 0));
        Var::concat(&[self.chain(&b3, x), self.chain(&b7, x), bp], 1)
    }

    fn block_e(&self, m: &str, x: &Var<f32>, max_pool: bool) -> Var<f32> {
        let n = |s: &str| format!("{m}.{s}");
        let b1 = self.unit(&n("branch1x1"), x);
        let h = self.unit(&n("branch3x3_1"), x);
        let b3 = Var::concat(&[self.unit(&n("branch3x3_2a"), &h), self.unit(&n("branch3x3_2b"), &h)], 1);
        let h = self.chain(&[n("branch3x3dbl_1"), n("branch3x3dbl_2")], x);
        let bd = Var::concat(&[self.unit(&n("branch3x3dbl_3a"), &h), self.unit(&n("branch3x3dbl_3b"), &h)], 1);
        let pooled = if max_pool {
            x.max_pool2d((3, 3), (1, 1), (1, 1))
        } else {
            x.avg_pool2d((3, 3), (1, 1), (1, 1), false)
        };
        let bp = self.unit(&n("branch_pool"), &pooled);
        Var::concat(&[b1, b3, bd, bp], 1)
    }

    /// Pool3 features `[B, 2048]` of grayscale images replicated to RGB.
    pub fn features(&self, images: &[PixelTensor]) -> Tensor<f32> {
        no_grad(|| {
            let gray = Var::constant(input_tensor(images, INPUT_SIDE));
            let b = images.len();
            let x = gray.expand(&[b, 3, INPUT_SIDE, INPUT_SIDE]);
            let stem: Vec<String> = ["Conv2d_1a_3x3", "Conv2d_2a_3x3", "Conv2d_2b_3x3"].map(String::from).to_vec();
            let mut h = self.chain(&stem, &x).max_pool2d((3, 3), (2, 2), (0, 0));
            h = self.chain(&["Conv2d_3b_1x1".to_string(), "Conv2d_4a_3x3".to_string()], &h);
            h = h.max_pool2d((3, 3), (2, 2), (0, 0));
            for m in ["Mixed_5b", "Mixed_5c", "Mixed_5d"] {
                h = self.block_a(m, &h);
            }
            h = self.block_b(&h);
            for m in ["Mixed_6b", "Mixed_6c", "Mixed_6d", "Mixed_6e"] {
                h = self.block_c(m, &h);
            }
            h = self.block_d(&h);
            h = self.block_e("Mixed_7b", &h, false);
            h = self.block_e("Mixed_7c", &h, true);
            nn::global_avg_pool(&h).value().clone()
        })
    }
}

impl EmbeddingModel for InceptionV3 {
    fn id(&self) -> String {
        format!("inception-v3-pool3-{}", self.weights_digest)
    }

    fn dim(&self) -> usize {
        INCEPTION_DIM
    }

    fn embed(&self, images: &[PixelTensor]) -> Result<DMatrix<f64>, QualityError> {
        let mut rows = Vec::with_capacity(images.len() * INCEPTION_DIM);
        for chunk in images.chunks(8) {
            rows.extend(self.features(chunk).data().iter().map(|&v| v as f64));
        }
        Ok(DMatrix::from_row_slice(images.len(), INCEPTION_DIM, &rows))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_weights_give_2048_finite_features() {
        let bytes = InceptionV3::random_safetensors(0);
        let net = InceptionV3::from_safetensors_bytes(&bytes).unwrap();
        let imgs = vec![PixelTensor::from_clamped(30, 40, (0..1200).map(|i| ((i * 37) % 200) as f32 / 100.0 - 1.0).collect())];
        let f = net.embed(&imgs).unwrap();
        assert_eq!(f.shape(), (1, 2048));
        assert!(f.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert!(f.iter().any(|v| *v > 0.0));
        assert!(net.id().starts_with("inception-v3-pool3-"));
    }

    #[test]
    fn missing_tensor_is_reported() {
        let empty = safetensors::serialize(Vec::<(String, safetensors::tensor::TensorView<'_>)>::new(), &None).unwrap();
        assert!(matches!(InceptionV3::from_safetensors_bytes(&empty), Err(QualityError::Weights(_))));
    }
}
