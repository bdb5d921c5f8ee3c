use nalgebra::{DMatrix, DVector, RealField, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{EmbeddingModel, QualityError, FID_BIAS_THRESHOLD};
use crate::corpus::PixelTensor;

/// Mean and unbiased covariance of a feature set.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSummary<T: RealField> {
    pub mean: DVector<T>,
    pub cov: DMatrix<T>,
    pub n: usize,
}

impl<T: RealField + Copy> GaussianSummary<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Rows of `features` are samples. The covariance is symmetrized.
pub fn gaussian_summary<T: RealField + Copy>(features: &DMatrix<T>) -> Result<GaussianSummary<T>, QualityError> {
    let (n, d) = features.shape();
    if n < 2 {
        return Err(QualityError::InsufficientSamples { needed: 2, got: n });
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(QualityError::NonFinite("features".into()));
    }
    let nt = T::from_usize(n).expect("sample count fits the scalar");
    let mean: DVector<T> = features.row_sum().transpose() / nt;
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        for j in 0..d {
            row[j] -= mean[j];
        }
    }
    let mut cov = centered.transpose() * &centered / (nt - T::one());
    symmetrize(&mut cov);
    Ok(GaussianSummary { mean, cov, n })
}

fn symmetrize<T: RealField + Copy>(m: &mut DMatrix<T>) {
    let half = T::from_f64(0.5).unwrap();
    let t = m.transpose();
    *m = (&*m + t) * half;
}

/// Symmetric PSD square root via eigendecomposition, eigenvalues clamped at 0.
fn psd_sqrt<T: RealField + Copy>(m: &DMatrix<T>) -> DMatrix<T> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(T::zero()).sqrt());
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&roots) * v.transpose();
    symmetrize(&mut out);
    out
}

/// Fréchet distance with its diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrechetOutcome<T> {
    /// Distance clamped at 0.
    pub value: T,
    /// Value before clamping.
    pub raw: T,
    /// Diagonal jitter that had to be added to both covariances, if any.
    pub jitter: Option<T>,
}

/// `Tr sqrt(A B)` as the nuclear norm of `A^½ B^½`: the singular values
/// of that product are the square roots of the eigenvalues of
/// `A^½ B A^½`, but come out without squaring rounding noise near zero,
/// and the result is the same for both argument orders. Returns `None`
/// when the factorization is not finite.
fn trace_sqrt_product<T: RealField + Copy>(a: &DMatrix<T>, b: &DMatrix<T>) -> Option<T> {
    let m = psd_sqrt(a) * psd_sqrt(b);
    let sv = m.singular_values();
    if sv.iter().any(|s| !s.is_finite()) {
        return None;
    }
    Some(sv.iter().fold(T::zero(), |acc, &s| acc + s))
}

/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa Σb)^½)`.
pub fn frechet_distance_detailed<T: RealField + Copy>(
    a: &GaussianSummary<T>,
    b: &GaussianSummary<T>,
) -> Result<FrechetOutcome<T>, QualityError> {
    if a.dim() != b.dim() || a.cov.shape() != (a.dim(), a.dim()) || b.cov.shape() != (b.dim(), b.dim()) {
        return Err(QualityError::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    if a.mean.iter().chain(b.mean.iter()).chain(a.cov.iter()).chain(b.cov.iter()).any(|v| !v.is_finite()) {
        return Err(QualityError::NonFinite("summary".into()));
    }
    let diff = &a.mean - &b.mean;
    let mean_term = diff.dot(&diff);
    let traces = a.cov.trace() + b.cov.trace();
    let two = T::from_f64(2.0).unwrap();
    let (tr_sqrt, jitter) = match trace_sqrt_product(&a.cov, &b.cov) {
        Some(t) => (t, None),
        None => {
            let eps = T::from_f64(1e-6).unwrap();
            let ident = DMatrix::<T>::identity(a.dim(), a.dim()) * eps;
            let t = trace_sqrt_product(&(&a.cov + &ident), &(&b.cov + &ident))
                .ok_or_else(|| QualityError::NonFinite("covariance product square root".into()))?;
            (t, Some(eps))
        }
    };
    let raw = mean_term + traces - two * tr_sqrt;
    Ok(FrechetOutcome { value: raw.max(T::zero()), raw, jitter })
}

pub fn frechet_distance<T: RealField + Copy>(a: &GaussianSummary<T>, b: &GaussianSummary<T>) -> Result<T, QualityError> {
    frechet_distance_detailed(a, b).map(|o| o.value)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidReport {
    pub fid: f64,
    pub fid_raw: f64,
    pub jitter: Option<f64>,
    pub embedder_id: String,
    pub feature_dim: usize,
    pub n_a: usize,
    pub n_b: usize,
    /// Set when either side has fewer than 2048 samples.
    pub small_sample_bias: bool,
}

impl FidReport {
    pub fn from_summaries(
        a: &GaussianSummary<f64>,
        b: &GaussianSummary<f64>,
        embedder_id: &str,
    ) -> Result<Self, QualityError> {
        let o = frechet_distance_detailed(a, b)?;
        let small = a.n.min(b.n) < FID_BIAS_THRESHOLD;
        if small {
            log::warn!("FID from {} / {} samples is biased upward (fewer than {FID_BIAS_THRESHOLD})", a.n, b.n);
        }
        Ok(Self {
            fid: o.value,
            fid_raw: o.raw,
            jitter: o.jitter,
            embedder_id: embedder_id.to_string(),
            feature_dim: a.dim(),
            n_a: a.n,
            n_b: b.n,
            small_sample_bias: small,
        })
    }

    /// Refuses to compare numbers produced by different embedders.
    pub fn ensure_comparable(&self, other: &FidReport) -> Result<(), QualityError> {
        if self.embedder_id == other.embedder_id {
            Ok(())
        } else {
            Err(QualityError::EmbedderMismatch(self.embedder_id.clone(), other.embedder_id.clone()))
        }
    }
}

pub fn fid(set_a: &[PixelTensor], set_b: &[PixelTensor], model: &dyn EmbeddingModel) -> Result<FidReport, QualityError> {
    let fa = model.embed(set_a)?;
    let fb = model.embed(set_b)?;
    FidReport::from_summaries(&gaussian_summary(&fa)?, &gaussian_summary(&fb)?, &model.id())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn summary(mean: Vec<f64>, cov: DMatrix<f64>) -> GaussianSummary<f64> {
        GaussianSummary { mean: DVector::from_vec(mean), cov, n: 100 }
    }

    #[test]
    fn two_point_summary() {
        let f = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 2.0, 2.0]);
        let s = gaussian_summary(&f).unwrap();
        assert_eq!(s.mean.as_slice(), &[1.0, 1.0]);
        assert_eq!(s.cov, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
        assert!(matches!(
            gaussian_summary(&DMatrix::<f64>::zeros(1, 3)),
            Err(QualityError::InsufficientSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn unit_shift_in_one_dimension() {
        let a = summary(vec![0.0], DMatrix::from_element(1, 1, 1.0));
        let b = summary(vec![1.0], DMatrix::from_element(1, 1, 1.0));
        assert!((frechet_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [1, 3, 8, 32] {
            let u = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| StandardNormal.sample(rng)).collect() };
            let va: Vec<f64> = (0..d).map(|_| rand::Rng::gen_range(&mut rng, 0.01..4.0)).collect();
            let vb: Vec<f64> = (0..d).map(|_| rand::Rng::gen_range(&mut rng, 0.01..4.0)).collect();
            let (ma, mb) = (u(&mut rng), u(&mut rng));
            let want: f64 = ma.iter().zip(&mb).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
                + va.iter().zip(&vb).map(|(x, y)| (x.sqrt() - y.sqrt()).powi(2)).sum::<f64>();
            let a = summary(ma, DMatrix::from_diagonal(&DVector::from_vec(va)));
            let b = summary(mb, DMatrix::from_diagonal(&DVector::from_vec(vb)));
            assert!((frechet_distance(&a, &b).unwrap() - want).abs() < 1e-8);
        }
    }

    #[test]
    fn singular_covariances_stay_finite() {
        let a = summary(vec![0.0; 3], DMatrix::zeros(3, 3));
        let b = summary(vec![0.0; 3], DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0, 0.0])));
        let o = frechet_distance_detailed(&a, &b).unwrap();
        assert!((o.value - 1.0).abs() < 1e-12);
        assert!(o.raw.is_finite());
    }

    #[test]
    fn works_in_single_precision() {
        let a = GaussianSummary::<f32> { mean: DVector::from_vec(vec![0.0, 0.0]), cov: DMatrix::identity(2, 2), n: 10 };
        let b = GaussianSummary::<f32> { mean: DVector::from_vec(vec![2.0, 0.0]), cov: DMatrix::identity(2, 2), n: 10 };
        assert!((frechet_distance(&a, &b).unwrap() - 4.0).abs() < 1e-5);
    }

    #[test]
    fn reports_refuse_mixed_embedders() {
        let a = summary(vec![0.0], DMatrix::from_element(1, 1, 1.0));
        let r1 = FidReport::from_summaries(&a, &a, "lite-1").unwrap();
        let r2 = FidReport::from_summaries(&a, &a, "inception-v3").unwrap();
        assert!(r1.small_sample_bias);
        assert!(matches!(r1.ensure_comparable(&r2), Err(QualityError::EmbedderMismatch(..))));
        assert!(r1.ensure_comparable(&r1.clone()).is_ok());
    }
}
