use rand::Rng;
use serde::{Deserialize, Serialize};
use spai_autograd::{grad, ParamSet, Scalar, Tensor, Var};

use super::GanError;

/// Generator objective of the minimax game.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorLossKind {
    /// `-E log D(G(z))`
    #[default]
    NonSaturating,
    /// `E log(1 - D(G(z)))`
    Saturating,
}

fn nonempty<T: Scalar>(v: &Var<T>) -> Result<(), GanError> {
    if v.numel() == 0 {
        Err(GanError::EmptyBatch)
    } else {
        Ok(())
    }
}

/// Discriminator and generator losses from probabilities `D(x)`,
/// `D(G(z))` in `[0, 1]`:
/// `loss_D = -E log D(x) - E log(1 - D(G(z)))`.
pub fn adversarial_losses<T: Scalar>(
    d_real: &Var<T>,
    d_fake: &Var<T>,
    kind: GeneratorLossKind,
) -> Result<(Var<T>, Var<T>), GanError> {
    nonempty(d_real)?;
    nonempty(d_fake)?;
    for (name, v) in [("D(x)", d_real), ("D(G(z))", d_fake)] {
        if let Some(bad) = v.value().data().iter().find(|p| !(T::zero()..=T::one()).contains(*p)) {
            return Err(GanError::Domain(format!("{name} = {bad}")));
        }
    }
    let one_minus_fake = d_fake.neg().add_scalar(T::one());
    let loss_d = d_real.log().mean().add(&one_minus_fake.log().mean()).neg();
    let loss_g = match kind {
        GeneratorLossKind::NonSaturating => d_fake.log().mean().neg(),
        GeneratorLossKind::Saturating => one_minus_fake.log().mean(),
    };
    Ok((loss_d, loss_g))
}

/// The same losses from logits `l` with `D = sigmoid(l)`, written with
/// softplus so they stay finite for saturated discriminators.
pub fn adversarial_losses_from_logits<T: Scalar>(
    l_real: &Var<T>,
    l_fake: &Var<T>,
    kind: GeneratorLossKind,
) -> Result<(Var<T>, Var<T>), GanError> {
    nonempty(l_real)?;
    nonempty(l_fake)?;
    // -log sigmoid(l) = softplus(-l);  -log(1 - sigmoid(l)) = softplus(l)
    let loss_d = l_real.neg().softplus().mean().add(&l_fake.softplus().mean());
    Ok((loss_d, generator_loss_from_logits(l_fake, kind)?))
}

/// Generator loss alone from fake logits.
pub fn generator_loss_from_logits<T: Scalar>(l_fake: &Var<T>, kind: GeneratorLossKind) -> Result<Var<T>, GanError> {
    nonempty(l_fake)?;
    Ok(match kind {
        GeneratorLossKind::NonSaturating => l_fake.neg().softplus().mean(),
        GeneratorLossKind::Saturating => l_fake.softplus().mean().neg(),
    })
}

/// Critic loss `mean(fake) - mean(real)` (to be minimized).
pub fn wasserstein_critic_loss<T: Scalar>(real: &Var<T>, fake: &Var<T>) -> Result<Var<T>, GanError> {
    nonempty(real)?;
    nonempty(fake)?;
    Ok(fake.mean().sub(&real.mean()))
}

/// Generator loss `-mean(fake)`.
pub fn wasserstein_generator_loss<T: Scalar>(fake: &Var<T>) -> Result<Var<T>, GanError> {
    nonempty(fake)?;
    Ok(fake.mean().neg())
}

/// `λ · E[(‖∇D(x̂)‖₂ − 1)²]` with `x̂ = ε·real + (1 − ε)·fake` and one
/// `ε ~ U[0, 1)` per example. The result stays differentiable in the
/// critic parameters.
pub fn gradient_penalty<T, R, F>(
    critic: F,
    real: &Tensor<T>,
    fake: &Tensor<T>,
    lambda: f64,
    rng: &mut R,
) -> Result<Var<T>, GanError>
where
    T: Scalar,
    R: Rng + ?Sized,
    F: Fn(&Var<T>) -> Result<Var<T>, GanError>,
{
    if real.shape() != fake.shape() {
        return Err(GanError::Shape(format!("real {:?} vs fake {:?}", real.shape(), fake.shape())));
    }
    let b = *real.shape().first().ok_or(GanError::EmptyBatch)?;
    if b == 0 {
        return Err(GanError::EmptyBatch);
    }
    let per = real.numel() / b;
    let eps: Vec<T> = (0..b).map(|_| T::of(rng.gen::<f64>())).collect();
    let x_hat = Tensor::from_fn(real.shape().to_vec(), |i| {
        let e = eps[i / per];
        e * real.data()[i] + (T::one() - e) * fake.data()[i]
    });
    gradient_penalty_at(critic, x_hat, lambda)
}

/// Penalty at given interpolates `x_hat` (`[B, ...]`).
pub fn gradient_penalty_at<T, F>(critic: F, x_hat: Tensor<T>, lambda: f64) -> Result<Var<T>, GanError>
where
    T: Scalar,
    F: Fn(&Var<T>) -> Result<Var<T>, GanError>,
{
    let b = x_hat.shape()[0];
    if b == 0 {
        return Err(GanError::EmptyBatch);
    }
    let per = x_hat.numel() / b;
    let x = Var::parameter(x_hat);
    let scores = critic(&x)?;
    // scores of different examples are independent, so one backward pass of
    // their sum yields every per-example input gradient
    let g = grad(&scores.sum(), &[&x], true).remove(0);
    let norms = g.reshape([b, per]).square().sum_to(&[b, 1]).add_scalar(T::of(1e-12)).sqrt();
    Ok(norms.add_scalar(-T::one()).square().mean().mul_scalar(T::of(lambda)))
}

/// Every parameter entry clamped to `[-c, c]`.
pub fn clip_weights<T: Scalar>(params: &ParamSet<T>, c: f64) -> Result<ParamSet<T>, GanError> {
    let mut out = params.clone();
    clip_weights_in_place(&mut out, c)?;
    Ok(out)
}

pub fn clip_weights_in_place<T: Scalar>(params: &mut ParamSet<T>, c: f64) -> Result<(), GanError> {
    if !(c.is_finite() && c > 0.0) {
        return Err(GanError::InvalidBound(c));
    }
    let c = T::of(c);
    for (_, t) in params.iter_mut() {
        for v in t.data_mut() {
            *v = v.max(-c).min(c);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Var<f64> {
        Var::constant(Tensor::new([xs.len()], xs.to_vec()))
    }

    #[test]
    fn adversarial_reference_values() {
        let (d, _) = adversarial_losses(&v(&[1.0, 1.0]), &v(&[0.0, 0.0]), GeneratorLossKind::NonSaturating).unwrap();
        assert_eq!(d.item(), 0.0);
        let (d, g) = adversarial_losses(&v(&[0.5; 3]), &v(&[0.5; 3]), GeneratorLossKind::NonSaturating).unwrap();
        assert!((d.item() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((g.item() - 2f64.ln()).abs() < 1e-15);
        let (_, g) = adversarial_losses(&v(&[0.5]), &v(&[0.25]), GeneratorLossKind::Saturating).unwrap();
        assert!((g.item() - 0.75f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn adversarial_domain_and_empty() {
        let k = GeneratorLossKind::NonSaturating;
        assert!(matches!(adversarial_losses(&v(&[1.2]), &v(&[0.5]), k), Err(GanError::Domain(_))));
        assert!(matches!(adversarial_losses(&v(&[0.5]), &v(&[-0.1]), k), Err(GanError::Domain(_))));
        assert!(matches!(adversarial_losses(&v(&[]), &v(&[0.5]), k), Err(GanError::EmptyBatch)));
        assert!(matches!(wasserstein_critic_loss(&v(&[]), &v(&[0.5])), Err(GanError::EmptyBatch)));
    }

    #[test]
    fn logit_form_matches_probability_form() {
        let lr = [-1.5, 0.2, 2.0];
        let lf = [0.7, -0.3, -2.5];
        let p = |xs: &[f64]| v(&xs.iter().map(|l| 1.0 / (1.0 + (-l).exp())).collect::<Vec<_>>());
        for kind in [GeneratorLossKind::NonSaturating, GeneratorLossKind::Saturating] {
            let (d1, g1) = adversarial_losses(&p(&lr), &p(&lf), kind).unwrap();
            let (d2, g2) = adversarial_losses_from_logits(&v(&lr), &v(&lf), kind).unwrap();
            assert!((d1.item() - d2.item()).abs() < 1e-12);
            assert!((g1.item() - g2.item()).abs() < 1e-12);
        }
    }

    #[test]
    fn adversarial_gradients_match_finite_differences() {
        let real = [0.3, 0.8, 0.55];
        let fake = [0.2, 0.6, 0.45];
        let h = 1e-4;
        for kind in [GeneratorLossKind::NonSaturating, GeneratorLossKind::Saturating] {
            let vr = Var::parameter(Tensor::new([3], real.to_vec()));
            let vf = Var::parameter(Tensor::new([3], fake.to_vec()));
            let (ld, lg) = adversarial_losses(&vr, &vf, kind).unwrap();
            let gd = grad(&ld, &[&vr, &vf], false);
            let gg = grad(&lg, &[&vf], false);
            let eval = |r: &[f64], f: &[f64]| {
                let (d, g) = adversarial_losses(&v(r), &v(f), kind).unwrap();
                (d.item(), g.item())
            };
            for i in 0..3 {
                let (mut rp, mut rm) = (real, real);
                rp[i] += h;
                rm[i] -= h;
                let fd = (eval(&rp, &fake).0 - eval(&rm, &fake).0) / (2.0 * h);
                assert!((fd - gd[0].value().data()[i]).abs() < 1e-5);
                let (mut fp, mut fm) = (fake, fake);
                fp[i] += h;
                fm[i] -= h;
                let fd_d = (eval(&real, &fp).0 - eval(&real, &fm).0) / (2.0 * h);
                let fd_g = (eval(&real, &fp).1 - eval(&real, &fm).1) / (2.0 * h);
                assert!((fd_d - gd[1].value().data()[i]).abs() < 1e-5);
                assert!((fd_g - gg[0].value().data()[i]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn wasserstein_values() {
        let c = wasserstein_critic_loss(&v(&[1.0, 3.0]), &v(&[0.5, -0.5, 3.0])).unwrap();
        assert!((c.item() - (1.0 - 2.0)).abs() < 1e-15);
        assert_eq!(wasserstein_generator_loss(&v(&[1.0, 2.0])).unwrap().item(), -1.5);
    }

    #[test]
    fn penalty_of_linear_critic() {
        // D(x) = <a, x> has gradient a everywhere
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for scale in [0.3, 1.0, 2.5] {
            let a = Tensor::<f64>::randn([1, 6], 1.0, &mut rng);
            let norm = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
            let a = a.map(|x| x * scale / norm);
            let av = Var::constant(a);
            let real = Tensor::randn([5, 6], 1.0, &mut rng);
            let fake = Tensor::randn([5, 6], 1.0, &mut rng);
            let gp = gradient_penalty(|x| Ok(x.matmul_t(&av, false, true).reshape([5])), &real, &fake, 10.0, &mut rng).unwrap();
            let want = 10.0 * (scale - 1.0f64).powi(2);
            assert!((gp.item() - want).abs() < 1e-5, "scale {scale}: {} vs {want}", gp.item());
        }
    }

    #[test]
    fn clip_errors() {
        let p = ParamSet::<f32>::new();
        assert!(matches!(clip_weights(&p, 0.0), Err(GanError::InvalidBound(_))));
        assert!(matches!(clip_weights(&p, f64::NAN), Err(GanError::InvalidBound(_))));
    }

    proptest! {
        #[test]
        fn clip_bounds_and_idempotence(vals in proptest::collection::vec(-1.0f64..1.0, 1..40), c in 0.001f64..0.5) {
            let mut p = ParamSet::new();
            p.insert("w", Tensor::new([vals.len()], vals.clone()));
            let once = clip_weights(&p, c).unwrap();
            prop_assert!(once.max_abs() <= c);
            prop_assert_eq!(clip_weights(&once, c).unwrap(), once.clone());
            for (x, y) in vals.iter().zip(once.get("w").unwrap().data()) {
                if x.abs() <= c { prop_assert_eq!(x, y); }
            }
        }

        #[test]
        fn self_critic_score_loss_is_zero(xs in proptest::collection::vec(-5.0f64..5.0, 1..20)) {
            let s = v(&xs);
            prop_assert!(wasserstein_critic_loss(&s, &s).unwrap().item().abs() < 1e-12);
        }
    }
}
