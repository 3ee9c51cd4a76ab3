mod common;

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ruledrift::bench::{run_itr_analysis, ItrAnalysisConfig};
use ruledrift::dataset::save_itr_csv;
use ruledrift::svm::train_weighted_svm;
use ruledrift::{
    derive_seed, estimate_value, fit_transfer_itr, make_weighting, weighted_zero_one_risk, DecisionRule, Error, Features, ItrDataset, ItrOptions,
    SvmConfig, TransferConfig, TransformFamily,
};

use common::{ipw_weight, rng};

fn random_itr(seed: u64, n: usize) -> ItrDataset {
    let mut r = rng(seed);
    let x: Vec<f64> = (0..2 * n).map(|_| r.random_range(-1.0..1.0)).collect();
    let t: Vec<i8> = (0..n).map(|_| if r.random_bool(0.5) { 1 } else { -1 }).collect();
    let rewards: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
    let pi: Vec<f64> = (0..n).map(|_| r.random_range(0.05..0.95)).collect();
    ItrDataset::new(Features::new(x, 2).unwrap(), t, rewards, Some(pi)).unwrap()
}

fn random_rule(seed: u64) -> DecisionRule {
    let mut r = rng(seed);
    DecisionRule::halfspace(vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)], r.random_range(-0.5..0.5)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn raw_risk_equals_flipped_risk_plus_constant(seed in any::<u64>(), n in 1usize..80) {
        let data = random_itr(seed, n);
        let rule = random_rule(seed ^ 7);
        let g = rule.labels_for(data.features()).unwrap();
        let pi = data.propensities().unwrap();
        let raw: f64 = (0..n)
            .filter(|&i| data.treatments()[i] != g[i])
            .map(|i| ipw_weight(data.rewards()[i], data.treatments()[i], pi[i]))
            .sum::<f64>() / n as f64;
        let w = make_weighting(&data).unwrap();
        let flipped = weighted_zero_one_risk(&rule, &w.to_dataset(data.features()).unwrap()).unwrap() + w.mean_constant();
        prop_assert!((raw - flipped).abs() <= 1e-12 * (1.0 + raw.abs()));
        prop_assert!(w.weights.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn value_is_mean_weight_minus_raw_risk(seed in any::<u64>(), n in 1usize..80) {
        let data = random_itr(seed, n);
        let rule = random_rule(seed ^ 9);
        let w = make_weighting(&data).unwrap();
        let mean_w = w.raw.iter().sum::<f64>() / n as f64;
        let risk = weighted_zero_one_risk(&rule, &w.to_dataset(data.features()).unwrap()).unwrap() + w.mean_constant();
        let value = estimate_value(&rule, &data).unwrap();
        prop_assert!((value - (mean_w - risk)).abs() <= 1e-10 * (1.0 + mean_w.abs()));
    }

    #[test]
    fn best_value_and_least_risk_coincide(seed in any::<u64>()) {
        let data = random_itr(seed, 200);
        let w = make_weighting(&data).unwrap();
        let classified = w.to_dataset(data.features()).unwrap();
        let rules: Vec<DecisionRule> = (0..8).map(|k| random_rule(seed.wrapping_add(k))).collect();
        let values: Vec<f64> = rules.iter().map(|r| estimate_value(r, &data).unwrap()).collect();
        let risks: Vec<f64> = rules.iter().map(|r| weighted_zero_one_risk(r, &classified).unwrap()).collect();
        let best_value = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let argmin = (0..8).min_by(|&a, &b| risks[a].total_cmp(&risks[b])).unwrap();
        prop_assert!((values[argmin] - best_value).abs() <= 1e-10);
    }
}

#[test]
fn treat_all_hand_value() {
    let data = ItrDataset::new(Features::new(vec![0.0, 1.0], 1).unwrap(), vec![1, 1], vec![1.0, 3.0], Some(vec![0.5, 0.5])).unwrap();
    assert_eq!(estimate_value(&DecisionRule::constant(true), &data).unwrap(), 4.0);
}

#[test]
fn overlap_and_reward_bound_are_enforced_before_training() {
    let good = random_itr(1, 40);
    let mut pi = good.propensities().unwrap().to_vec();
    pi[3] = 0.005;
    pi[17] = 0.996;
    let bad = ItrDataset::new(good.features().clone(), good.treatments().to_vec(), good.rewards().to_vec(), Some(pi)).unwrap();
    let cfg = TransferConfig::new(TransformFamily::function_offset(-1.0, 1.0).unwrap());
    match fit_transfer_itr(&good, &bad, &cfg, &ItrOptions::default()) {
        Err(Error::Overlap { rows, count, .. }) => {
            assert_eq!(count, 2);
            assert_eq!(rows, vec![4, 18]);
        }
        other => panic!("expected an overlap error, got {other:?}"),
    }
    let options = ItrOptions { reward_bound: Some(2.0), ..ItrOptions::default() };
    assert!(matches!(fit_transfer_itr(&good, &good, &cfg, &options), Err(Error::RewardBound { .. })));
}

/// Randomized design with bounded rewards whose treatment effect changes sign
/// on `beta . x + shift = 0`.
fn randomized(r: &mut ChaCha8Rng, n: usize, shift: f64) -> ItrDataset {
    let beta = [3.0, 1.0, 1.0];
    let mut x = Vec::with_capacity(3 * n);
    let mut t = Vec::with_capacity(n);
    let mut rewards = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..3).map(|_| r.random_range(-3.0..3.0)).collect();
        let s: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + shift;
        let ti: i8 = if r.random_bool(0.5) { 1 } else { -1 };
        rewards.push(2.0 + f64::from(ti) * (s / 2.0).tanh() + r.random_range(-1.0..1.0));
        t.push(ti);
        x.extend(row);
    }
    ItrDataset::new(Features::new(x, 3).unwrap(), t, rewards, Some(vec![0.5; n])).unwrap()
}

/// Value of the rule under the design above, by direct simulation of
/// potential outcomes.
fn true_value(rule: &DecisionRule, shift: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let mut total = 0.0;
    let mut sq = 0.0;
    for _ in 0..n {
        let x: Vec<f64> = (0..3).map(|_| r.random_range(-3.0..3.0)).collect();
        let s = 3.0 * x[0] + x[1] + x[2] + shift;
        let t = f64::from(rule.predict(&x).unwrap());
        let v = 2.0 + t * (s / 2.0).tanh() + r.random_range(-1.0..1.0);
        total += v;
        sq += v * v;
    }
    let m = total / n as f64;
    (m, ((sq / n as f64 - m * m) / n as f64).sqrt())
}

#[test]
fn transferred_rule_is_not_worse_than_target_only_in_most_reps() {
    let family = TransformFamily::function_offset(-3.0, 3.0).unwrap();
    let mut wins = 0;
    let mut log = Vec::new();
    for rep in 0..20u64 {
        let s = derive_seed(0x17, &[rep]);
        let mut r = rng(s);
        let source = randomized(&mut r, 1000, 0.0);
        let target = randomized(&mut r, 300, 1.0);
        let validation = randomized(&mut r, 2000, 1.0);
        let cfg = TransferConfig::new(family.clone()).with_seeds(derive_seed(s, &[1]), derive_seed(s, &[2]));
        let fit = fit_transfer_itr(&source, &target, &cfg, &ItrOptions::default()).unwrap();
        let target_w = make_weighting(&target).unwrap().to_dataset(target.features()).unwrap();
        let target_only = DecisionRule::svm(train_weighted_svm(&target_w, &SvmConfig::practical(300, 3)).unwrap());
        let (ours, theirs) = (estimate_value(&fit.rule_final, &validation).unwrap(), estimate_value(&target_only, &validation).unwrap());
        log.push((ours, theirs));
        if ours >= theirs {
            wins += 1;
        }
    }
    assert!(wins >= 14, "{wins}/20: {log:?}");
}

#[test]
fn csv_analysis_reaches_the_optimal_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(99);
    let source = dir.path().join("source.csv");
    let target = dir.path().join("target.csv");
    save_itr_csv(&randomized(&mut r, 10_000, 0.0), &source).unwrap();
    let target_data = randomized(&mut r, 10_000, 1.0);
    save_itr_csv(&target_data, &target).unwrap();
    let rows = run_itr_analysis(&source, &target, &ItrAnalysisConfig::default()).unwrap();
    assert_eq!(rows.iter().map(|r| r.rule.as_str()).collect::<Vec<_>>(), ["proposed", "source_only", "target_only"]);

    let optimal = DecisionRule::halfspace(vec![3.0, 1.0, 1.0], 1.0).unwrap();
    let (oracle, oracle_se) = true_value(&optimal, 1.0, 200_000, 5);
    // Standard error of the IPW estimate on the target sample.
    let w = make_weighting(&target_data).unwrap();
    let rule_terms: Vec<f64> = (0..target_data.len())
        .map(|i| if optimal.predict(target_data.features().row(i)).unwrap() == target_data.treatments()[i] { w.raw[i] } else { 0.0 })
        .collect();
    let mean = rule_terms.iter().sum::<f64>() / rule_terms.len() as f64;
    let var = rule_terms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (rule_terms.len() - 1) as f64;
    let se = (var / rule_terms.len() as f64 + oracle_se * oracle_se).sqrt();
    assert!((rows[0].value - oracle).abs() <= 2.0 * se, "proposed {} vs oracle {oracle} (2 SE {})", rows[0].value, 2.0 * se);
}
