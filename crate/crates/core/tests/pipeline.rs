mod common;

use ruledrift::bench::SettingTemplate;
use ruledrift::svm::train_weighted_svm;
use ruledrift::{
    derive_seed, fit_transfer_classifier, fit_transfer_from_source, generate, weighted_zero_one_risk, Boundary, Candidate, DecisionRule, Drift,
    Regression, Role, SimSetting, SvmConfig, TransferConfig, TransformFamily,
};
use std::sync::Arc;

fn sample(d: usize, theta: f64, n: usize, role: Role, seed: u64) -> ruledrift::Dataset {
    generate(&SimSetting::linear_translation(d, theta, n, role, seed)).unwrap().dataset
}

fn manual_risk(rule: &DecisionRule, data: &ruledrift::Dataset) -> f64 {
    let wrong = (0..data.len()).filter(|&i| rule.predict(data.features().row(i)).unwrap() != data.label(i)).count();
    wrong as f64 / data.len() as f64
}

#[test]
fn final_rule_attains_minimum_holdout_risk() {
    for seed in 0..4u64 {
        let source = sample(3, 0.0, 400, Role::Source, seed);
        let target = sample(3, 1.5, 120, Role::Target, seed + 100);
        let cfg = TransferConfig::new(TransformFamily::function_offset(-3.0, 3.0).unwrap()).with_seeds(seed, seed);
        let fit = fit_transfer_classifier(&source, &target, &cfg).unwrap();
        let holdout = target.subset(&fit.holdout_rows);
        let risks = [&fit.rule_calibrated, &fit.rule_target, &fit.rule_source].map(|r| manual_risk(r, &holdout));
        assert_eq!(risks, fit.holdout_risks);
        let best = risks.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(manual_risk(&fit.rule_final, &holdout), best);
        let first = Candidate::ORDER[risks.iter().position(|r| *r == best).unwrap()];
        assert_eq!(fit.selection, first);
        // Calibration and holdout halves partition the target.
        let mut all = [fit.calibration_rows.clone(), fit.holdout_rows.clone()].concat();
        all.sort();
        assert_eq!(all, (0..target.len()).collect::<Vec<_>>());
        assert_eq!(fit.calibration_rows.len(), 60);
    }
}

#[test]
fn no_drift_keeps_calibrated_close_to_source() {
    let mut gaps = Vec::new();
    for seed in 0..5u64 {
        let source = sample(3, 0.0, 600, Role::Source, seed);
        let target = sample(3, 0.0, 600, Role::Source, seed + 50);
        let cfg = TransferConfig::new(TransformFamily::function_offset(-3.0, 3.0).unwrap()).with_seeds(seed, seed);
        let fit = fit_transfer_classifier(&source, &target, &cfg).unwrap();
        let (cal, src) = (fit.holdout_risks[0], fit.holdout_risks[2]);
        let n = fit.holdout_rows.len() as f64;
        let se = (src * (1.0 - src) / n).sqrt();
        assert!((cal - src).abs() <= 2.0 * se.max(1.0 / n), "seed {seed}: {cal} vs {src}");
        gaps.push(fit.theta_hat()[0].abs());
    }
    assert!(common::median(&gaps) < 0.5, "{gaps:?}");
}

#[test]
fn identical_inputs_give_identical_fits() {
    let source = sample(4, 0.0, 300, Role::Source, 1);
    let target = sample(4, 1.0, 100, Role::Target, 2);
    let family = SettingTemplate { boundary: Boundary::Linear { beta: None }, drift: Drift::Translation, regression: Regression::Logistic }
        .family(4, None)
        .unwrap();
    let cfg = TransferConfig::new(family).with_seeds(9, 10);
    let a = fit_transfer_classifier(&source, &target, &cfg).unwrap();
    let b = fit_transfer_classifier(&source, &target, &cfg).unwrap();
    assert_eq!(a.theta_hat().iter().map(|t| t.to_bits()).collect::<Vec<_>>(), b.theta_hat().iter().map(|t| t.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.selection, b.selection);
    assert_eq!(a.holdout_risks, b.holdout_risks);
    let mut text_a = Vec::new();
    let mut text_b = Vec::new();
    a.write_summary_csv(&mut text_a).unwrap();
    b.write_summary_csv(&mut text_b).unwrap();
    assert_eq!(text_a, text_b);
}

#[test]
fn shared_source_model_gives_the_same_fit() {
    let source = sample(3, 0.0, 300, Role::Source, 7);
    let target = sample(3, 1.0, 80, Role::Target, 8);
    let cfg = TransferConfig::new(TransformFamily::function_offset(-3.0, 3.0).unwrap()).with_seeds(1, 2);
    let full = fit_transfer_classifier(&source, &target, &cfg).unwrap();
    let model = Arc::new(train_weighted_svm(&source, &SvmConfig::practical(300, 3)).unwrap());
    let reused = fit_transfer_from_source(model, &target, &cfg).unwrap();
    assert_eq!(full.theta_hat(), reused.theta_hat());
    assert_eq!(full.holdout_risks, reused.holdout_risks);
}

/// Monte Carlo check: with d=5, shift 1, n_P=2000 and n_Q=400 the transferred
/// rule beats a target-only SVM on fresh target data in most replicates.
#[test]
fn transfer_beats_target_only_in_most_reps() {
    let d = 5;
    let family = SettingTemplate { boundary: Boundary::Linear { beta: None }, drift: Drift::Translation, regression: Regression::Logistic }
        .family(d, None)
        .unwrap();
    let mut wins = 0;
    let mut log = Vec::new();
    for rep in 0..20u64 {
        let s = derive_seed(0xa5, &[rep]);
        let source = sample(d, 1.0, 2000, Role::Source, derive_seed(s, &[0]));
        let target = sample(d, 1.0, 400, Role::Target, derive_seed(s, &[1]));
        let validation = sample(d, 1.0, 400, Role::Target, derive_seed(s, &[2]));
        let cfg = TransferConfig::new(family.clone()).with_seeds(derive_seed(s, &[3]), derive_seed(s, &[4]));
        let fit = fit_transfer_classifier(&source, &target, &cfg).unwrap();
        let target_only = DecisionRule::svm(train_weighted_svm(&target, &SvmConfig::practical(400, d)).unwrap());
        let (ours, theirs) = (
            weighted_zero_one_risk(&fit.rule_final, &validation).unwrap(),
            weighted_zero_one_risk(&target_only, &validation).unwrap(),
        );
        log.push((ours, theirs));
        if ours < theirs {
            wins += 1;
        }
    }
    assert!(wins >= 14, "{wins}/20 wins: {log:?}");
}
