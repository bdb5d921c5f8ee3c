use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use spai_autograd::Scalar;

use super::QualityError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub early_exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            early_exaggeration: 12.0,
            exaggeration_iterations: 250,
            seed: 0,
        }
    }
}

/// A 2-D embedding with its labels and the KL divergence trace
/// `(iteration, KL)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMap<T> {
    pub points: Vec<[T; 2]>,
    pub labels: Vec<String>,
    pub kl_history: Vec<(usize, T)>,
}

impl<T: Scalar> ProjectionMap<T> {
    /// `x,y,label` rows with a header.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["x", "y", "label"]).expect("in-memory write");
        for (p, l) in self.points.iter().zip(&self.labels) {
            w.write_record([p[0].to_string(), p[1].to_string(), l.clone()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn final_kl(&self) -> Option<T> {
        self.kl_history.last().map(|&(_, kl)| kl)
    }
}

fn sq_distances<T: Scalar>(x: &[Vec<T>]) -> Vec<T> {
    let n = x.len();
    let mut d = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i + 1..n {
            let s = x[i].iter().zip(&x[j]).map(|(a, b)| (*a - *b) * (*a - *b)).fold(T::zero(), |s, v| s + v);
            d[i * n + j] = s;
            d[j * n + i] = s;
        }
    }
    d
}

/// Row-conditional affinities with each row's entropy matched to
/// `ln(perplexity)` by bisection on the precision.
fn conditional_probabilities<T: Scalar>(d: &[T], n: usize, perplexity: f64) -> Vec<T> {
    let target = T::of(perplexity.ln());
    let tol = T::of(1e-5);
    let mut p = vec![T::zero(); n * n];
    let mut row = vec![T::zero(); n];
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (T::one(), T::neg_infinity(), T::infinity());
        let dmin = (0..n).filter(|&j| j != i).map(|j| d[i * n + j]).fold(T::infinity(), T::min);
        for _ in 0..200 {
            let mut sum = T::zero();
            let mut weighted = T::zero();
            for j in 0..n {
                row[j] = if j == i { T::zero() } else { (-(d[i * n + j] - dmin) * beta).exp() };
                sum += row[j];
                weighted += row[j] * (d[i * n + j] - dmin);
            }
            // H = ln Σ + β E[d]
            let entropy = sum.ln() + beta * weighted / sum;
            let diff = entropy - target;
            for v in row.iter_mut() {
                *v /= sum;
            }
            if diff.abs() < tol {
                break;
            }
            if diff > T::zero() {
                lo = beta;
                beta = if hi.is_infinite() { beta * T::of(2.0) } else { (beta + hi) / T::of(2.0) };
            } else {
                hi = beta;
                beta = if lo.is_infinite() { beta / T::of(2.0) } else { (beta + lo) / T::of(2.0) };
            }
        }
        p[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    p
}

fn joint_probabilities<T: Scalar>(d: &[T], n: usize, perplexity: f64) -> Vec<T> {
    let p = conditional_probabilities(d, n, perplexity);
    let denom = T::of(2.0 * n as f64);
    let floor = T::of(1e-12);
    let mut joint = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((p[i * n + j] + p[j * n + i]) / denom).max(floor);
            }
        }
    }
    joint
}

/// Student-t kernel values and their normalizer.
fn kernel<T: Scalar>(y: &[[T; 2]]) -> (Vec<T>, T) {
    let n = y.len();
    let mut num = vec![T::zero(); n * n];
    let mut z = T::zero();
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = T::one() / (T::one() + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += v + v;
        }
    }
    (num, z)
}

fn kl_divergence<T: Scalar>(p: &[T], y: &[[T; 2]]) -> T {
    let n = y.len();
    let (num, z) = kernel(y);
    let floor = T::min_positive_value();
    let mut kl = T::zero();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let pij = p[i * n + j];
                kl += pij * (pij / (num[i * n + j] / z).max(floor)).ln();
            }
        }
    }
    kl
}

fn gradient<T: Scalar>(p: &[T], y: &[[T; 2]], exaggeration: T) -> Vec<[T; 2]> {
    let n = y.len();
    let (num, z) = kernel(y);
    let four = T::of(4.0);
    let mut g = vec![[T::zero(); 2]; n];
    for i in 0..n {
        let (mut gx, mut gy) = (T::zero(), T::zero());
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = (exaggeration * p[i * n + j] - num[i * n + j] / z) * num[i * n + j];
            gx += w * (y[i][0] - y[j][0]);
            gy += w * (y[i][1] - y[j][1]);
        }
        g[i] = [four * gx, four * gy];
    }
    g
}

/// Exact t-SNE to two dimensions. After the early-exaggeration phase a step
/// that would raise the KL divergence is shortened until it does not (and
/// skipped if that fails), so the recorded KL never increases there.
pub fn tsne_project<T: Scalar>(
    features: &[Vec<T>],
    labels: &[String],
    cfg: &TsneConfig,
) -> Result<ProjectionMap<T>, QualityError> {
    let n = features.len();
    if !(cfg.perplexity > 0.0) || (n as f64) < 3.0 * cfg.perplexity {
        return Err(QualityError::InvalidPerplexity { perplexity: cfg.perplexity, n });
    }
    if labels.len() != n {
        return Err(QualityError::DimensionMismatch(format!("{n} points, {} labels", labels.len())));
    }
    let d = features[0].len();
    if features.iter().any(|f| f.len() != d) {
        return Err(QualityError::DimensionMismatch("ragged feature rows".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(QualityError::NonFinite("features".into()));
    }
    let p = joint_probabilities(&sq_distances(features), n, cfg.perplexity);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid std");
    let mut y: Vec<[T; 2]> = (0..n).map(|_| [T::of(init.sample(&mut rng)), T::of(init.sample(&mut rng))]).collect();
    let mut vel = vec![[T::zero(); 2]; n];
    let mut gains = vec![[T::one(); 2]; n];
    let lr = T::of(cfg.learning_rate);
    let mut history = Vec::new();
    let mut kl = kl_divergence(&p, &y);
    history.push((0, kl));

    for it in 1..=cfg.iterations {
        let exaggerating = it <= cfg.exaggeration_iterations;
        let ex = if exaggerating { T::of(cfg.early_exaggeration) } else { T::one() };
        let momentum = T::of(if it <= cfg.exaggeration_iterations { 0.5 } else { 0.8 });
        let g = gradient(&p, &y, ex);
        for i in 0..n {
            for k in 0..2 {
                let same_sign = (g[i][k] > T::zero()) == (vel[i][k] > T::zero());
                gains[i][k] = if same_sign { gains[i][k] * T::of(0.8) } else { gains[i][k] + T::of(0.2) };
                gains[i][k] = gains[i][k].max(T::of(0.01));
                vel[i][k] = momentum * vel[i][k] - lr * gains[i][k] * g[i][k];
            }
        }
        if exaggerating {
            for (yi, vi) in y.iter_mut().zip(&vel) {
                yi[0] += vi[0];
                yi[1] += vi[1];
            }
            kl = kl_divergence(&p, &y);
        } else {
            let mut scale = T::one();
            let mut accepted = false;
            for _ in 0..30 {
                let cand: Vec<[T; 2]> = y.iter().zip(&vel).map(|(yi, vi)| [yi[0] + scale * vi[0], yi[1] + scale * vi[1]]).collect();
                let cand_kl = kl_divergence(&p, &cand);
                if cand_kl <= kl {
                    y = cand;
                    kl = cand_kl;
                    accepted = true;
                    break;
                }
                scale = scale * T::of(0.5);
            }
            if !accepted || scale < T::one() {
                vel.iter_mut().for_each(|v| *v = [T::zero(); 2]);
                gains.iter_mut().for_each(|g| *g = [T::one(); 2]);
            }
        }
        if it % 50 == 0 || it == cfg.iterations || it == cfg.exaggeration_iterations {
            history.push((it, kl));
        }
    }
    Ok(ProjectionMap { points: y, labels: labels.to_vec(), kl_history: history })
}

/// Mean silhouette coefficient of labeled 2-D points.
pub fn silhouette<T: Scalar>(points: &[[T; 2]], labels: &[String]) -> f64 {
    let n = points.len();
    let dist = |i: usize, j: usize| {
        let dx = (points[i][0] - points[j][0]).to_f64_lossy();
        let dy = (points[i][1] - points[j][1]).to_f64_lossy();
        (dx * dx + dy * dy).sqrt()
    };
    let mut classes: Vec<&String> = labels.iter().collect();
    classes.sort();
    classes.dedup();
    let mut total = 0.0;
    for i in 0..n {
        let mean_to = |c: &String| {
            let (s, k) = (0..n)
                .filter(|&j| j != i && &labels[j] == c)
                .fold((0.0, 0usize), |(s, k), j| (s + dist(i, j), k + 1));
            if k == 0 {
                None
            } else {
                Some(s / k as f64)
            }
        };
        let Some(a) = mean_to(&labels[i]) else { continue };
        let b = classes.iter().filter(|c| ***c != labels[i]).filter_map(|c| mean_to(c)).fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn two_blobs<T: Scalar>(n: usize, dim: usize, seed: u64) -> (Vec<Vec<T>>, Vec<String>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        let mut l = Vec::new();
        for i in 0..n {
            let c = if i % 2 == 0 { 0.0 } else { 10.0 };
            x.push((0..dim).map(|_| T::of(c + normal.sample(&mut rng))).collect());
            l.push(if i % 2 == 0 { "a".to_string() } else { "b".to_string() });
        }
        (x, l)
    }

    #[test]
    fn perplexity_precondition() {
        let (x, l) = two_blobs::<f64>(20, 3, 0);
        assert!(matches!(tsne_project(&x, &l, &TsneConfig::default()), Err(QualityError::InvalidPerplexity { .. })));
        let cfg = TsneConfig { perplexity: 0.0, ..Default::default() };
        assert!(tsne_project(&x, &l, &cfg).is_err());
    }

    #[test]
    fn row_entropy_matches_perplexity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        let n = x.len();
        let d = sq_distances(&x);
        let cond = conditional_probabilities(&d, n, 10.0);
        for i in 0..n {
            let row = &cond[i * n..(i + 1) * n];
            let h: f64 = -row.iter().filter(|&&p| p > 0.0).map(|p| p * p.ln()).sum::<f64>();
            assert!((h.exp() - 10.0).abs() < 1e-3, "row {i}: perplexity {}", h.exp());
        }
        let joint = joint_probabilities(&d, n, 10.0);
        assert!((joint.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(joint[i * n + j], joint[j * n + i]);
            }
        }
    }

    #[test]
    fn separates_two_clusters_with_monotone_kl() {
        let (x, l) = two_blobs::<f64>(100, 10, 1);
        let cfg = TsneConfig { iterations: 500, ..Default::default() };
        let map = tsne_project(&x, &l, &cfg).unwrap();
        assert!(silhouette(&map.points, &l) > 0.5);
        let after: Vec<f64> = map.kl_history.iter().filter(|(it, _)| *it >= cfg.exaggeration_iterations).map(|p| p.1).collect();
        assert!(after.windows(2).all(|w| w[1] <= w[0]), "{after:?}");
        assert!(map.to_csv().starts_with("x,y,label\n"));
    }

    #[test]
    fn runs_in_single_precision() {
        let (x, l) = two_blobs::<f32>(40, 5, 2);
        let cfg = TsneConfig { perplexity: 10.0, iterations: 300, ..Default::default() };
        let map = tsne_project(&x, &l, &cfg).unwrap();
        assert!(map.points.iter().all(|p| p[0].is_finite() && p[1].is_finite()));
        assert!(silhouette(&map.points, &l) > 0.5);
    }
}
