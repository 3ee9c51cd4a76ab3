mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use ruledrift::svm::train_weighted_svm;
use ruledrift::{calibrate, nelder_mead, weighted_zero_one_risk, Dataset, DecisionRule, ErmConfig, NelderMeadConfig, ParamBox, SvmConfig, TransformFamily};

use common::{brute_force_offset_minimum, random_dataset, rng};

fn random_base(seed: u64) -> DecisionRule {
    let mut r = rng(seed);
    if seed % 2 == 0 {
        DecisionRule::halfspace(vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)], r.random_range(-0.5..0.5)).unwrap()
    } else {
        let data = random_dataset(&mut r, 30, 2, false);
        DecisionRule::svm(train_weighted_svm(&data, &SvmConfig::practical(30, 2)).unwrap())
    }
}

fn scores(base: &DecisionRule, data: &Dataset) -> Vec<f64> {
    (0..data.len()).map(|i| base.decision_value(data.features().row(i)).unwrap().unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn best_value_never_increases(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, sx in 0.0f64..1.0, sy in 0.0f64..1.0, step in any::<bool>()) {
        let bounds = ParamBox::new(vec![-3.0, -3.0], vec![3.0, 3.0]).unwrap();
        let f = move |t: &[f64]| {
            let q = (t[0] - c0).powi(2) + 3.0 * (t[1] - c1).powi(2);
            if step { q.floor() } else { q }
        };
        let start = [6.0 * sx - 3.0, 6.0 * sy - 3.0];
        let res = nelder_mead(f, &start, &bounds, &NelderMeadConfig::default()).unwrap();
        for w in res.best_trace.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!(bounds.contains(&res.point));
        prop_assert_eq!(res.value, f(&res.point));
    }

    #[test]
    fn offset_matches_brute_force(seed in any::<u64>(), n in 1usize..50, weighted in any::<bool>()) {
        let data = random_dataset(&mut rng(seed), n, 2, weighted);
        let base = random_base(seed);
        let fam = TransformFamily::function_offset(-2.0, 2.0).unwrap();
        let fit = calibrate(&base, &fam, &data, &ErmConfig::default().with_seed(seed)).unwrap();
        prop_assert_eq!(fit.achieved_risk, brute_force_offset_minimum(&scores(&base, &data), &data, -2.0, 2.0));
        prop_assert!(fit.theta_hat[0] >= -2.0 && fit.theta_hat[0] <= 2.0);
    }

    #[test]
    fn never_worse_than_untransformed(seed in any::<u64>(), n in 2usize..60, rotate in any::<bool>()) {
        let data = random_dataset(&mut rng(seed), n, 2, true);
        let base = random_base(seed);
        let fam = if rotate {
            TransformFamily::coordinate_rotation(0, 1, -1.0, 1.0).unwrap()
        } else {
            TransformFamily::spatial_translation(vec![0.6, -0.8], -1.0, 1.0).unwrap()
        };
        let cfg = ErmConfig { n_starts: Some(6), ..ErmConfig::default().with_seed(seed) };
        let fit = calibrate(&base, &fam, &data, &cfg).unwrap();
        prop_assert!(fit.achieved_risk <= weighted_zero_one_risk(&base, &data).unwrap());
        let refit = weighted_zero_one_risk(&base.with_transform(&fam, &fit.theta_hat).unwrap(), &data).unwrap();
        prop_assert_eq!(fit.achieved_risk, refit);
    }

    #[test]
    fn row_order_does_not_matter(seed in any::<u64>(), n in 2usize..50) {
        let data = random_dataset(&mut rng(seed), n, 2, false);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng(seed ^ 0xff));
        let shuffled = data.subset(&order);
        let base = random_base(seed);
        let fam = TransformFamily::function_offset(-2.0, 2.0).unwrap();
        let cfg = ErmConfig::default().with_seed(3);
        let a = calibrate(&base, &fam, &data, &cfg).unwrap().achieved_risk;
        let b = calibrate(&base, &fam, &shuffled, &cfg).unwrap().achieved_risk;
        // Unweighted risks are k/n, so equality is exact.
        prop_assert_eq!(a, b);
    }
}

#[test]
fn hand_dataset_against_interval_enumeration() {
    let xs = [-2.6, -1.9, -1.2, -0.8, -0.3, 0.1, 0.4, 0.9, 1.3, 1.8, 2.2, 2.9];
    let ys = [-1, -1, 1, -1, -1, 1, -1, 1, 1, -1, 1, 1];
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let data = Dataset::from_rows(&rows, ys.to_vec()).unwrap();
    let base = DecisionRule::halfspace(vec![1.0], 0.0).unwrap();
    let fit = calibrate(&base, &TransformFamily::function_offset(-5.0, 5.0).unwrap(), &data, &ErmConfig::default()).unwrap();
    // Thresholds between consecutive points: the rule labels x >= t positive.
    let mut best = usize::MAX;
    for k in 0..=xs.len() {
        let errors = (0..xs.len()).filter(|&i| (i >= k) != (ys[i] == 1)).count();
        best = best.min(errors);
    }
    assert_eq!(fit.achieved_risk, best as f64 / 12.0);
}

#[test]
fn deterministic_shift_is_recovered_to_order_statistic_gap() {
    let mut r = rng(12);
    let xs: Vec<f64> = (0..2000).map(|_| r.random_range(-3.0..3.0)).collect();
    let labels: Vec<i8> = xs.iter().map(|&x| if x > 1.0 { 1 } else { -1 }).collect();
    let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let data = Dataset::from_rows(&rows, labels).unwrap();
    let base = DecisionRule::halfspace(vec![1.0], 0.0).unwrap();
    let fit = calibrate(&base, &TransformFamily::function_offset(-5.0, 5.0).unwrap(), &data, &ErmConfig::default()).unwrap();
    assert_eq!(fit.achieved_risk, 0.0);
    let below = xs.iter().copied().filter(|&x| x <= 1.0).fold(f64::NEG_INFINITY, f64::max);
    let above = xs.iter().copied().filter(|&x| x > 1.0).fold(f64::INFINITY, f64::min);
    // Membership is x + theta >= 0 with theta = -threshold.
    let threshold = -fit.theta_hat[0];
    assert!(threshold > below && threshold <= above, "{threshold} not in ({below}, {above}]");
}
