//! Published reference figures for the original full-scale study. They are
//! printed next to measured numbers in reports and never used as pass/fail
//! thresholds: the original runs used a licensed corpus and weeks of GPU time.

use crate::ganzoo::ModelKind;

/// Best FID per model family at 320×240.
pub const BEST_FID: [(ModelKind, f64); 4] = [
    (ModelKind::Cgan, 159.12),
    (ModelKind::Wgan, 97.66),
    (ModelKind::WganGp, 92.12),
    (ModelKind::Stylegan2Lite, 16.29),
];

/// D-EER in percent per model family.
pub const D_EER_PERCENT: [(ModelKind, f64); 4] = [
    (ModelKind::Cgan, 41.1),
    (ModelKind::Wgan, 35.02),
    (ModelKind::WganGp, 25.01),
    (ModelKind::Stylegan2Lite, 10.01),
];

/// Unknown-attack test with synthetic PAI plus an equal number of impostor
/// images.
pub const MIXED_SET_APCER: f64 = 0.3244;
pub const MIXED_SET_BPCER: f64 = 0.0;
/// As published. The mean of the two rates above is 0.1622; reports compute
/// ACER strictly as that mean and show this figure separately.
pub const MIXED_SET_ACER_PUBLISHED: f64 = 0.1603;

/// Share of synthetic images accepted as bona fide when shown alone.
pub const SYNTHETIC_ONLY_BONAFIDE_FRACTION: f64 = 1.0;

/// FID against KIMG for the best style-based run, evaluated every 200 KIMG.
pub const STYLE_FID_CURVE: [(f64, f64); 19] = [
    (200.0, 352.34),
    (400.0, 337.78),
    (600.0, 281.34),
    (800.0, 237.16),
    (1000.0, 138.18),
    (1200.0, 98.81),
    (1400.0, 78.91),
    (1600.0, 73.43),
    (1800.0, 61.37),
    (2000.0, 42.01),
    (2200.0, 38.73),
    (2400.0, 37.61),
    (2600.0, 36.54),
    (2800.0, 23.16),
    (3000.0, 19.23),
    (3200.0, 18.81),
    (3400.0, 17.97),
    (3600.0, 16.29),
    (3800.0, 27.91),
];

pub fn best_fid(kind: ModelKind) -> f64 {
    BEST_FID.iter().find(|(k, _)| *k == kind).map(|(_, v)| *v).expect("every kind listed")
}

pub fn d_eer_percent(kind: ModelKind) -> f64 {
    D_EER_PERCENT.iter().find(|(k, _)| *k == kind).map(|(_, v)| *v).expect("every kind listed")
}

/// Difference between the published ACER and the mean of the published
/// APCER and BPCER.
pub fn acer_discrepancy() -> f64 {
    (MIXED_SET_APCER + MIXED_SET_BPCER) / 2.0 - MIXED_SET_ACER_PUBLISHED
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_tables_are_consistent() {
        let best = STYLE_FID_CURVE.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        assert_eq!(*best, (3600.0, best_fid(ModelKind::Stylegan2Lite)));
        let mut order: Vec<_> = ModelKind::ALL.iter().map(|&k| (d_eer_percent(k), best_fid(k))).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert!(order.windows(2).all(|w| w[0].1 < w[1].1));
        assert!((acer_discrepancy() - 0.0019).abs() < 1e-12);
    }
}
