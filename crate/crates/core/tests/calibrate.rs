use contrafraud::calibrate::{
    adjust_alpha_low, bh_index, pvalues_against, pvalues_high, pvalues_low, pvalues_with, realized_fdp, simulate_fdr,
    thresholds, thresholds_heldout, thresholds_with, Estimator, Side, SimulationSpec, ThresholdDecision,
};
use contrafraud::classify::ScoreSet;
use proptest::prelude::*;
use rand_distr::{Beta, Uniform};

fn set(s: &[f64], y: &[u8]) -> ScoreSet {
    ScoreSet::new((0..s.len()).map(|i| format!("a{i}")).collect(), s.to_vec(), y.to_vec()).unwrap()
}

fn naive(s: &[f64], y: &[u8], side: Side) -> Vec<Option<f64>> {
    (0..s.len())
        .map(|i| {
            let (mut num, mut den) = (0usize, 0usize);
            for j in 0..s.len() {
                if j == i {
                    continue;
                }
                let (is_null, beyond) = match side {
                    Side::High => (y[j] == 0, s[j] > s[i]),
                    Side::Low => (y[j] == 1, s[j] < s[i]),
                };
                den += usize::from(is_null);
                num += usize::from(is_null && beyond);
            }
            (den > 0).then(|| num as f64 / den as f64)
        })
        .collect()
}

#[test]
fn high_side_examples() {
    let p = pvalues_high(&set(&[0.9, 0.7, 0.3, 0.1], &[1, 0, 0, 0])).unwrap().values;
    assert_eq!(p[0], 0.0);
    assert_eq!(p[2], 0.5);
}

#[test]
fn low_side_examples() {
    let p = pvalues_low(&set(&[0.9, 0.05, 0.3, 0.1], &[1, 1, 0, 0])).unwrap().values;
    assert_eq!(p[2], 0.5);
    assert_eq!(p[3], 0.5);
    assert_eq!(p[1], 0.0);
}

#[test]
fn zero_denominator_names_the_account() {
    let err = pvalues_high(&set(&[0.2, 0.4], &[0, 1])).unwrap_err().to_string();
    assert!(err.contains("a0"), "{err}");
}

proptest! {
    #[test]
    fn pvalues_match_quadratic_oracle(
        pairs in prop::collection::vec((0u32..50, 0u8..2), 3..60)
    ) {
        let s: Vec<f64> = pairs.iter().map(|p| f64::from(p.0) / 50.0).collect();
        let y: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        for side in [Side::High, Side::Low] {
            let oracle = naive(&s, &y, side);
            let got = contrafraud::calibrate::pvalues(&set(&s, &y), side);
            if oracle.iter().any(Option::is_none) {
                prop_assert!(got.is_err());
            } else {
                let got = got.unwrap().values;
                for (g, o) in got.iter().zip(&oracle) {
                    prop_assert!((g - o.unwrap()).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn bh_is_monotone_in_level(p in prop::collection::vec(0.0f64..1.0, 1..50), a in 0.01f64..0.5, b in 0.01f64..0.5) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(bh_index(&p, lo).unwrap().unwrap_or(0) <= bh_index(&p, hi).unwrap().unwrap_or(0));
    }

    #[test]
    fn high_pvalues_ignore_monotone_transforms(
        pairs in prop::collection::vec((0u32..1000, 0u8..2), 4..40)
    ) {
        let s: Vec<f64> = pairs.iter().map(|p| f64::from(p.0) / 1000.0).collect();
        let y: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        prop_assume!(y.iter().filter(|&&v| v == 0).count() >= 2);
        let t: Vec<f64> = s.iter().map(|v| v.powi(3)).collect();
        prop_assert_eq!(pvalues_high(&set(&s, &y)).unwrap(), pvalues_high(&set(&t, &y)).unwrap());
    }

    #[test]
    fn rejections_nested_and_upward_closed(
        raw in prop::collection::vec((0u32..10_000, 0u8..2), 10..80),
        a in 0.05f64..0.6,
        b in 0.05f64..0.6,
    ) {
        let mut seen = std::collections::HashSet::new();
        let raw: Vec<(u32, u8)> = raw.into_iter().filter(|p| seen.insert(p.0)).collect();
        let s: Vec<f64> = raw.iter().map(|p| f64::from(p.0) / 10_000.0).collect();
        let y: Vec<u8> = raw.iter().map(|p| p.1).collect();
        let frauds = y.iter().filter(|&&v| v == 1).count();
        prop_assume!(frauds >= 2 && y.len() - frauds >= 2);
        let sc = set(&s, &y);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (h1, l1) = thresholds(&sc, lo, lo / 10.0).unwrap();
        let (h2, l2) = thresholds(&sc, hi, hi / 10.0).unwrap();
        for (small, big) in [(&h1, &h2), (&l1, &l2)] {
            prop_assert!(small.rejected.iter().all(|i| big.rejected.contains(i)));
        }
        for d in [&h1, &h2] {
            if let Some(t) = d.threshold {
                for (i, &v) in s.iter().enumerate() {
                    if v > t {
                        prop_assert!(d.rejected.contains(&i));
                    }
                }
            }
        }
    }
}

#[test]
fn bh_examples() {
    assert_eq!(bh_index(&[0.001, 0.02, 0.03, 0.5], 0.1).unwrap(), Some(3));
    assert_eq!(bh_index(&[1.0; 5], 0.5).unwrap(), None);
    assert_eq!(bh_index(&[0.1], 0.1).unwrap(), Some(1));
    assert!(bh_index(&[0.1], 0.0).is_err());
}

#[test]
fn alpha_correction() {
    let mut y = vec![0u8; 100];
    y[..5].fill(1);
    let a = adjust_alpha_low(0.02, &y).unwrap();
    assert!((a.value - 0.4).abs() < 1e-12 && !a.capped);
    assert_eq!(adjust_alpha_low(0.02, &[1, 1, 1]).unwrap().value, 0.02);
    let mut y = vec![0u8; 100];
    y[0] = 1;
    let a = adjust_alpha_low(0.02, &y).unwrap();
    assert_eq!(a.value, 1.0);
    assert!(a.capped);
    assert!(adjust_alpha_low(0.1, &[0, 0]).is_err());
}

#[test]
fn threshold_examples() {
    // the top non-fraud has no other non-fraud above it, so its strict
    // p-value is 0 as well and it is rejected with the frauds
    let sc = set(&[0.95, 0.9, 0.1, 0.05], &[1, 1, 0, 0]);
    assert_eq!(pvalues_high(&sc).unwrap().values, [0.0, 0.0, 0.0, 1.0]);
    let (high, _) = thresholds(&sc, 0.5, 0.5).unwrap();
    assert_eq!(high.rejected, [0, 1, 2]);
    assert_eq!(high.threshold, Some(0.1));
    assert!((high.realized_fdp.unwrap() - 1.0 / 3.0).abs() < 1e-15);

    // with strict counts the top null always has p = 0, so an empty crossing
    // needs the conservative estimator
    let tiny_set = set(&[0.3, 0.9, 0.1, 0.5, 0.2], &[1, 0, 0, 0, 1]);
    assert_eq!(thresholds(&tiny_set, 0.01, 0.5).unwrap().0.bh_index, Some(1));
    let (tiny, _) = thresholds_with(&tiny_set, 0.01, 0.5, Estimator::Conservative).unwrap();
    assert_eq!(tiny.bh_index, None);
    assert!(tiny.rejected.is_empty() && tiny.threshold.is_none());

    let mirror = set(&[0.05, 0.1, 0.9, 0.92, 0.95], &[0, 0, 1, 1, 1]);
    let (_, low) = thresholds(&mirror, 0.5, 0.3).unwrap();
    assert!((low.adjusted_level.unwrap() - 0.5).abs() < 1e-15);
    // mirror image: the lowest fraud also has strict p = 0
    assert_eq!(low.rejected, [0, 1, 2]);
    assert_eq!(low.threshold, Some(0.9));
    assert!((low.realized_fdp.unwrap() - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn fdp_ratio() {
    let mut d = ThresholdDecision {
        side: Side::High,
        level: 0.1,
        adjusted_level: None,
        bh_index: None,
        threshold: None,
        rejected: vec![],
        rejected_ids: vec![],
        realized_fdp: None,
    };
    assert_eq!(realized_fdp(&d, &[0, 1]).unwrap(), 0.0);
    d.rejected = vec![0, 1];
    assert_eq!(realized_fdp(&d, &[1, 0]).unwrap(), 0.5);
    d.rejected = vec![0];
    assert_eq!(realized_fdp(&d, &[1, 0]).unwrap(), 0.0);
}

#[test]
fn heldout_mode_uses_calibration_nulls() {
    let cal = set(&[0.1, 0.2, 0.3, 0.4, 0.8, 0.9], &[0, 0, 0, 0, 1, 1]);
    let p = pvalues_against(&cal, &[0.35, 0.95], Side::High, Estimator::Strict).unwrap();
    assert_eq!(p.values, [0.25, 0.0]);
    let p = pvalues_against(&cal, &[0.35, 0.95], Side::High, Estimator::Conservative).unwrap();
    assert_eq!(p.values, [0.4, 0.2]);
    let test = set(&[0.05, 0.95, 0.85, 0.15], &[0, 1, 1, 0]);
    let (high, low) = thresholds_heldout(&cal, &test, 0.3, 0.1, Estimator::Strict).unwrap();
    assert!(high.rejected.contains(&1));
    assert!((low.adjusted_level.unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn conservative_estimator() {
    let sc = set(&[0.95, 0.9, 0.1, 0.05], &[1, 1, 0, 0]);
    let p = pvalues_with(&sc, Side::High, Estimator::Conservative).unwrap().values;
    assert_eq!(p, [1.0 / 3.0, 1.0 / 3.0, 0.5, 1.0]);
    let p = pvalues_with(&sc, Side::Low, Estimator::Conservative).unwrap().values;
    assert_eq!(p, [1.0, 0.5, 1.0 / 3.0, 1.0 / 3.0]);

    let sc = set(&[0.95, 0.9, 0.85, 0.8, 0.1, 0.05], &[1, 1, 1, 1, 0, 0]);
    let (high, _) = thresholds_with(&sc, 0.55, 0.5, Estimator::Conservative).unwrap();
    assert_eq!(high.rejected, [0, 1, 2, 3]);
    assert_eq!(high.threshold, Some(0.8));
    assert_eq!(high.realized_fdp, Some(0.0));
}

fn spec(pi1: f64, level: f64, estimator: Estimator) -> SimulationSpec {
    SimulationSpec {
        n: 500,
        pi1,
        level,
        side: Side::High,
        reps: 200,
        estimator,
    }
}

#[test]
fn all_null_simulation() {
    let u = Uniform::new(0.0, 1.0).unwrap();
    // the strict estimator always gives the top null p = 0
    let strict = simulate_fdr(&u, &u, spec(0.0, 0.1, Estimator::Strict), 1).unwrap();
    assert_eq!(strict.mean_fdp, 1.0);
    let cons = simulate_fdr(&u, &u, spec(0.0, 0.1, Estimator::Conservative), 1).unwrap();
    assert!(cons.mean_fdp <= 0.1 + cons.half_width, "{cons:?}");
}

#[test]
fn separated_simulation() {
    let lo = Uniform::new(0.0, 0.4).unwrap();
    let hi = Uniform::new(0.6, 1.0).unwrap();
    let strict = simulate_fdr(&lo, &hi, spec(0.2, 0.1, Estimator::Strict), 2).unwrap();
    // BH still controls at pi0 * alpha, it does not force zero
    assert!(strict.mean_fdp > 0.0 && strict.mean_fdp <= 0.1);
    let at = |v: f64| rand_distr::Uniform::new_inclusive(v, v).unwrap();
    let det = simulate_fdr(&at(0.2), &at(0.8), spec(0.2, 0.1, Estimator::Conservative), 2).unwrap();
    assert_eq!(det.mean_fdp, 0.0);
    assert_eq!(det.mean_rejections, 100.0);
}

#[test]
fn simulation_is_reproducible() {
    let u = Uniform::new(0.0, 1.0).unwrap();
    let spec = |pi1, level| spec(pi1, level, Estimator::Strict);

    let a = simulate_fdr(
        &Beta::new(2.0, 5.0).unwrap(),
        &Beta::new(5.0, 2.0).unwrap(),
        spec(0.2, 0.2),
        3,
    )
    .unwrap();
    let b = simulate_fdr(
        &Beta::new(2.0, 5.0).unwrap(),
        &Beta::new(5.0, 2.0).unwrap(),
        spec(0.2, 0.2),
        3,
    )
    .unwrap();
    assert_eq!(a, b);
    assert!(simulate_fdr(
        &u,
        &u,
        SimulationSpec {
            reps: 99,
            ..spec(0.1, 0.1)
        },
        0
    )
    .is_err());
}
