use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spai_autograd::{nn, no_grad, Tensor, Var};

use super::QualityError;
use crate::corpus::{resize, PixelTensor};

/// Maps images to fixed-length feature vectors.
pub trait EmbeddingModel {
    /// Identifies the model and its weights; FID values are only comparable
    /// between equal ids.
    fn id(&self) -> String;
    fn dim(&self) -> usize;
    /// One row per image.
    fn embed(&self, images: &[PixelTensor]) -> Result<DMatrix<f64>, QualityError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiteEmbedderConfig {
    /// Images are resized to `input_side × input_side`.
    pub input_side: usize,
    pub stage1_filters: usize,
    pub stage1_patch: usize,
    pub stage2_filters: usize,
    pub stage2_patch: usize,
    /// Output grid per channel after the final pooling.
    pub grid: usize,
    pub patch_samples: usize,
    pub seed: u64,
}

impl Default for LiteEmbedderConfig {
    fn default() -> Self {
        Self {
            input_side: 64,
            stage1_filters: 8,
            stage1_patch: 7,
            stage2_filters: 16,
            stage2_patch: 3,
            grid: 2,
            patch_samples: 20_000,
            seed: 0,
        }
    }
}

/// A two-stage convolutional embedder whose filters are principal
/// components of corpus patches (or seeded random filters when no corpus is
/// given). Each stage is convolution, sign-split rectification and average
/// pooling; the output has `2 · stage2_filters · grid²` features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiteEmbedder {
    pub config: LiteEmbedderConfig,
    pub origin: String,
    filters1: Vec<f32>,
    filters2: Vec<f32>,
}

const STAGE1_POOL: usize = 4;

fn pca_filters(patches: &DMatrix<f64>, k: usize) -> Vec<f32> {
    let n = patches.nrows() as f64;
    let mean = patches.row_sum() / n;
    let mut centered = patches.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (n - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut out = Vec::new();
    for &j in order.iter().take(k) {
        let col = eig.eigenvectors.column(j);
        // fixed sign: the largest-magnitude entry is positive
        let pivot = col.iter().copied().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let s = if pivot < 0.0 { -1.0 } else { 1.0 };
        out.extend(col.iter().map(|v| (v * s) as f32));
    }
    out
}

fn random_filters(rng: &mut ChaCha8Rng, k: usize, len: usize) -> Vec<f32> {
    let mut out = Vec::with_capacity(k * len);
    for _ in 0..k {
        let f: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        out.extend(f.iter().map(|v| (v / norm) as f32));
    }
    out
}

fn sample_patches(maps: &[Tensor<f32>], patch: usize, count: usize, rng: &mut ChaCha8Rng, remove_dc: bool) -> DMatrix<f64> {
    let s = maps[0].shape();
    let (c, h, w) = (s[1], s[2], s[3]);
    let len = c * patch * patch;
    let mut data = Vec::with_capacity(count * len);
    for _ in 0..count {
        let m = &maps[rng.gen_range(0..maps.len())];
        let b = rng.gen_range(0..m.shape()[0]);
        let y0 = rng.gen_range(0..=h - patch);
        let x0 = rng.gen_range(0..=w - patch);
        let start = data.len();
        for ci in 0..c {
            for dy in 0..patch {
                for dx in 0..patch {
                    data.push(m.data()[((b * c + ci) * h + y0 + dy) * w + x0 + dx] as f64);
                }
            }
        }
        if remove_dc {
            let mean = data[start..].iter().sum::<f64>() / len as f64;
            data[start..].iter_mut().for_each(|v| *v -= mean);
        }
    }
    DMatrix::from_row_slice(count, len, &data)
}

impl LiteEmbedder {
    /// Filters drawn from a seeded generator.
    pub fn random(config: LiteEmbedderConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let p1 = config.stage1_patch * config.stage1_patch;
        let filters1 = random_filters(&mut rng, config.stage1_filters, p1);
        let c2 = 2 * config.stage1_filters * config.stage2_patch * config.stage2_patch;
        let filters2 = random_filters(&mut rng, config.stage2_filters, c2);
        Self { config, origin: "random".into(), filters1, filters2 }
    }

    /// Fits both filter banks by PCA of patches from `images`. The first
    /// stage-1 filter is the patch mean, the rest are components of
    /// mean-removed patches.
    pub fn fit(images: &[PixelTensor], config: LiteEmbedderConfig) -> Result<Self, QualityError> {
        if images.len() < 2 {
            return Err(QualityError::InsufficientSamples { needed: 2, got: images.len() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let p1 = config.stage1_patch;
        let inputs: Vec<Tensor<f32>> = images.chunks(64).map(|c| input_tensor(c, config.input_side)).collect();
        let patches = sample_patches(&inputs, p1, config.patch_samples, &mut rng, true);
        let mut filters1 = vec![1.0 / p1 as f32; p1 * p1];
        filters1.extend(pca_filters(&patches, config.stage1_filters - 1));
        let mut emb = Self { config, origin: "pca".into(), filters1, filters2: Vec::new() };
        let stage1: Vec<Tensor<f32>> = inputs.iter().map(|x| emb.stage1(x)).collect();
        let patches = sample_patches(&stage1, emb.config.stage2_patch, emb.config.patch_samples, &mut rng, false);
        emb.filters2 = pca_filters(&patches, emb.config.stage2_filters);
        Ok(emb)
    }

    fn stage1(&self, x: &Tensor<f32>) -> Tensor<f32> {
        let c = &self.config;
        let f = Var::constant(Tensor::new([c.stage1_filters, 1, c.stage1_patch, c.stage1_patch], self.filters1.clone()));
        let pad = c.stage1_patch / 2;
        no_grad(|| {
            let y = nn::conv2d(&Var::constant(x.clone()), &f, None, (1, 1), (pad, pad));
            let r = Var::concat(&[y.relu(), y.neg().relu()], 1);
            r.avg_pool2d((STAGE1_POOL, STAGE1_POOL), (STAGE1_POOL, STAGE1_POOL), (0, 0), true).value().clone()
        })
    }

    fn stage2(&self, s1: &Tensor<f32>) -> Tensor<f32> {
        let c = &self.config;
        let cin = 2 * c.stage1_filters;
        let f = Var::constant(Tensor::new([c.stage2_filters, cin, c.stage2_patch, c.stage2_patch], self.filters2.clone()));
        let pad = c.stage2_patch / 2;
        let side = c.input_side / STAGE1_POOL;
        let cell = side / c.grid;
        no_grad(|| {
            let y = nn::conv2d(&Var::constant(s1.clone()), &f, None, (1, 1), (pad, pad));
            let r = Var::concat(&[y.relu(), y.neg().relu()], 1);
            r.avg_pool2d((cell, cell), (cell, cell), (0, 0), true).value().clone()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("embedder serializes")
    }

    pub fn save(&self, path: &Path) -> Result<(), QualityError> {
        std::fs::write(path, self.to_json()).map_err(|e| QualityError::Io { path: path.into(), source: e })
    }

    pub fn load(path: &Path) -> Result<Self, QualityError> {
        let s = std::fs::read_to_string(path).map_err(|e| QualityError::Io { path: path.into(), source: e })?;
        serde_json::from_str(&s).map_err(|e| QualityError::Weights(e.to_string()))
    }
}

pub(crate) fn input_tensor(images: &[PixelTensor], side: usize) -> Tensor<f32> {
    let mut data = Vec::with_capacity(images.len() * side * side);
    for img in images {
        let r = resize(img, (side, side)).expect("side is positive");
        data.extend_from_slice(r.data());
    }
    Tensor::new([images.len(), 1, side, side], data)
}

impl EmbeddingModel for LiteEmbedder {
    fn id(&self) -> String {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(&self.config).expect("config serializes"));
        for v in self.filters1.iter().chain(&self.filters2) {
            h.update(v.to_le_bytes());
        }
        format!("lite-{}-{}", self.origin, &hex::encode(h.finalize())[..12])
    }

    fn dim(&self) -> usize {
        2 * self.config.stage2_filters * self.config.grid * self.config.grid
    }

    fn embed(&self, images: &[PixelTensor]) -> Result<DMatrix<f64>, QualityError> {
        let d = self.dim();
        let mut rows = Vec::with_capacity(images.len() * d);
        for chunk in images.chunks(64) {
            let x = input_tensor(chunk, self.config.input_side);
            let f = self.stage2(&self.stage1(&x));
            rows.extend(f.data().iter().map(|&v| v as f64));
        }
        Ok(DMatrix::from_row_slice(images.len(), d, &rows))
    }
}
