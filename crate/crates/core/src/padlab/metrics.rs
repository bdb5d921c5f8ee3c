use serde::{Deserialize, Serialize};

use super::{GroundTruth, PadError, PadScore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoMetricsReport {
    #[serde(with = "extended_real")]
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
    pub acer: f64,
    pub n_attack: usize,
    pub n_bonafide: usize,
    /// Attacks accepted as bona fide.
    pub attack_errors: usize,
    /// Bona fide samples rejected.
    pub bonafide_errors: usize,
}

impl IsoMetricsReport {
    fn from_counts(threshold: f64, n_attack: usize, n_bonafide: usize, attack_errors: usize, bonafide_errors: usize) -> Self {
        let apcer = attack_errors as f64 / n_attack as f64;
        let bpcer = bonafide_errors as f64 / n_bonafide as f64;
        Self { threshold, apcer, bpcer, acer: (apcer + bpcer) / 2.0, n_attack, n_bonafide, attack_errors, bonafide_errors }
    }
}

fn class_counts(scores: &[PadScore]) -> Result<(usize, usize), PadError> {
    let n_attack = scores.iter().filter(|s| s.ground_truth == GroundTruth::Attack).count();
    let n_bonafide = scores.len() - n_attack;
    if n_attack == 0 {
        return Err(PadError::MissingClass(GroundTruth::Attack));
    }
    if n_bonafide == 0 {
        return Err(PadError::MissingClass(GroundTruth::Bonafide));
    }
    Ok((n_attack, n_bonafide))
}

pub fn iso_metrics(scores: &[PadScore], threshold: f64) -> Result<IsoMetricsReport, PadError> {
    let (n_attack, n_bonafide) = class_counts(scores)?;
    let mut attack_errors = 0;
    let mut bonafide_errors = 0;
    for s in scores {
        match s.ground_truth {
            GroundTruth::Attack if s.score >= threshold => attack_errors += 1,
            GroundTruth::Bonafide if s.score < threshold => bonafide_errors += 1,
            _ => {}
        }
    }
    Ok(IsoMetricsReport::from_counts(threshold, n_attack, n_bonafide, attack_errors, bonafide_errors))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    #[serde(with = "extended_real")]
    pub threshold: f64,
    pub apcer: f64,
    pub bpcer: f64,
}

/// Operating points by ascending threshold: `-inf`, every distinct score,
/// then `+inf`. Along the list APCER never rises and BPCER never falls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetCurve {
    pub points: Vec<DetPoint>,
    pub n_attack: usize,
    pub n_bonafide: usize,
}

impl DetCurve {
    /// CSV `threshold,apcer,bpcer`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,apcer,bpcer\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.apcer, p.bpcer));
        }
        out
    }
}

pub fn det_curve(scores: &[PadScore]) -> Result<DetCurve, PadError> {
    let (n_attack, n_bonafide) = class_counts(scores)?;
    let mut sorted: Vec<(f64, GroundTruth)> = scores.iter().map(|s| (s.score, s.ground_truth)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let point = |threshold, attack_errors: usize, bonafide_errors: usize| DetPoint {
        threshold,
        apcer: attack_errors as f64 / n_attack as f64,
        bpcer: bonafide_errors as f64 / n_bonafide as f64,
    };
    // At threshold t, samples strictly below t are rejected.
    let mut points = vec![point(f64::NEG_INFINITY, n_attack, 0)];
    let (mut attack_below, mut bonafide_below) = (0, 0);
    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].0;
        points.push(point(t, n_attack - attack_below, bonafide_below));
        while i < sorted.len() && sorted[i].0 == t {
            match sorted[i].1 {
                GroundTruth::Attack => attack_below += 1,
                GroundTruth::Bonafide => bonafide_below += 1,
            }
            i += 1;
        }
    }
    points.push(point(f64::INFINITY, 0, n_bonafide));
    Ok(DetCurve { points, n_attack, n_bonafide })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualErrorPoint {
    pub eer: f64,
    #[serde(with = "extended_real")]
    pub threshold: f64,
}

/// Equal-error point of a staircase curve. At the first point where APCER
/// no longer exceeds BPCER the curve crosses the diagonal; the rate is the
/// midpoint of the interval the two neighbouring points bracket, and the
/// threshold is that first point's.
pub fn d_eer(curve: &DetCurve) -> EqualErrorPoint {
    let pts = &curve.points;
    // The `-inf` point has APCER 1 and BPCER 0, the `+inf` point the reverse.
    let k = pts.iter().position(|p| p.apcer <= p.bpcer).expect("curve ends at (0, 1)").max(1);
    let b = pts[k];
    if b.apcer == b.bpcer {
        return EqualErrorPoint { eer: b.apcer, threshold: b.threshold };
    }
    let a = pts[k - 1];
    let hi = a.apcer.min(b.bpcer);
    let lo = a.bpcer.max(b.apcer);
    EqualErrorPoint { eer: (hi + lo) / 2.0, threshold: b.threshold }
}

/// JSON has no infinities; the curve sentinels travel as strings.
mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) if t == "-inf" => Ok(f64::NEG_INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("bad threshold {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(gt: GroundTruth, v: f64) -> PadScore {
        PadScore::new("x", gt, v).unwrap()
    }

    #[test]
    fn counting_definition() {
        let mut v: Vec<PadScore> = (0..10).map(|i| s(GroundTruth::Attack, if i < 3 { 0.9 } else { 0.1 })).collect();
        v.extend((0..10).map(|_| s(GroundTruth::Bonafide, 0.8)));
        let r = iso_metrics(&v, 0.5).unwrap();
        assert_eq!((r.apcer, r.bpcer, r.acer), (0.3, 0.0, 0.15));
        assert!(matches!(iso_metrics(&v[..10], 0.5), Err(PadError::MissingClass(GroundTruth::Bonafide))));
    }

    #[test]
    fn ties_accept() {
        let v = [s(GroundTruth::Attack, 0.5), s(GroundTruth::Bonafide, 0.5)];
        let r = iso_metrics(&v, 0.5).unwrap();
        assert_eq!((r.apcer, r.bpcer), (1.0, 0.0));
    }

    #[test]
    fn identical_scores_give_two_corners() {
        let v = [s(GroundTruth::Attack, 0.4), s(GroundTruth::Bonafide, 0.4), s(GroundTruth::Attack, 0.4)];
        let c = det_curve(&v).unwrap();
        for p in &c.points {
            assert!((p.apcer, p.bpcer) == (1.0, 0.0) || (p.apcer, p.bpcer) == (0.0, 1.0));
        }
        assert_eq!(c.points.len(), 3);
    }

    #[test]
    fn separable_gives_zero() {
        let v = [s(GroundTruth::Attack, 0.1), s(GroundTruth::Attack, 0.2), s(GroundTruth::Bonafide, 0.7)];
        let c = det_curve(&v).unwrap();
        assert!(c.points.iter().any(|p| p.apcer == 0.0 && p.bpcer == 0.0));
        let e = d_eer(&c);
        assert_eq!(e.eer, 0.0);
        assert_eq!(e.threshold, 0.7);
    }

    #[test]
    fn inverted_classifier_gives_one() {
        let v = [s(GroundTruth::Attack, 0.9), s(GroundTruth::Bonafide, 0.1)];
        assert_eq!(d_eer(&det_curve(&v).unwrap()).eer, 1.0);
    }

    fn score_sets() -> impl Strategy<Value = Vec<PadScore>> {
        (1usize..10, 1usize..10).prop_flat_map(|(na, nb)| {
            (
                proptest::collection::vec(0u8..=10, na),
                proptest::collection::vec(0u8..=10, nb),
            )
                .prop_map(|(a, b)| {
                    a.into_iter()
                        .map(|v| s(GroundTruth::Attack, v as f64 / 10.0))
                        .chain(b.into_iter().map(|v| s(GroundTruth::Bonafide, v as f64 / 10.0)))
                        .collect()
                })
        })
    }

    proptest! {
        #[test]
        fn curve_is_a_monotone_staircase_matching_iso(v in score_sets()) {
            let c = det_curve(&v).unwrap();
            for w in c.points.windows(2) {
                prop_assert!(w[0].threshold < w[1].threshold);
                prop_assert!(w[1].apcer <= w[0].apcer);
                prop_assert!(w[1].bpcer >= w[0].bpcer);
            }
            for p in &c.points {
                let r = iso_metrics(&v, p.threshold).unwrap();
                prop_assert_eq!((r.apcer, r.bpcer), (p.apcer, p.bpcer));
                prop_assert_eq!(r.acer, (r.apcer + r.bpcer) / 2.0);
            }
        }

        #[test]
        fn order_and_monotone_transforms_do_not_matter(v in score_sets(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let base = d_eer(&det_curve(&v).unwrap());
            let mut shuffled = v.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(d_eer(&det_curve(&shuffled).unwrap()).eer, base.eer);
            let squashed: Vec<PadScore> = v.iter().map(|p| PadScore { score: p.score * p.score, ..p.clone() }).collect();
            let c1 = det_curve(&v).unwrap();
            let c2 = det_curve(&squashed).unwrap();
            let rates = |c: &DetCurve| c.points.iter().map(|p| (p.apcer, p.bpcer)).collect::<Vec<_>>();
            prop_assert_eq!(rates(&c1), rates(&c2));
            prop_assert_eq!(d_eer(&c2).eer, base.eer);
        }

        #[test]
        fn eer_is_between_the_bracketing_rates(v in score_sets()) {
            let e = d_eer(&det_curve(&v).unwrap()).eer;
            prop_assert!((0.0..=1.0).contains(&e));
        }
    }
}
