//! The transfer procedure: source SVM, target split, calibration of the
//! source rule on the first target half, target-only SVM on the same half,
//! and selection among the three rules on the second half.
//!
//! Also hosts the rate exponent and the `(lambda, sigma)` schedule that the
//! excess-risk bound prescribes.

use std::io::Write;
use std::sync::Arc;

use crate::dataset::{split_half, Dataset};
use crate::erm::{calibrate, weighted_zero_one_risk, CalibrationResult, ErmConfig};
use crate::error::{Error, Result};
use crate::rules::{DecisionRule, TransformFamily};
use crate::svm::{train_weighted_svm, SvmConfig, SvmModel};

/// How an SVM's `(lambda, sigma)` are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvmHyper {
    Explicit(SvmConfig),
    /// `SvmConfig::practical(n, d)`.
    Practical,
    /// Rate-optimal schedule for margin exponent `alpha` and noise exponent
    /// `gamma_prime = gamma / d`.
    Theoretical { alpha: f64, gamma_prime: f64 },
}

impl SvmHyper {
    pub fn resolve(&self, n: usize, d: usize) -> Result<SvmConfig> {
        match *self {
            SvmHyper::Explicit(cfg) => {
                cfg.validate()?;
                Ok(cfg)
            }
            SvmHyper::Practical => Ok(SvmConfig::practical(n, d)),
            SvmHyper::Theoretical { alpha, gamma_prime } => {
                let beta = rate_beta(alpha, gamma_prime)?;
                let (lambda, sigma) = schedule_lambda_sigma(n, beta, gamma_prime, d)?;
                SvmConfig::new(lambda, sigma)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferConfig {
    pub source_svm: SvmHyper,
    pub target_svm: SvmHyper,
    pub family: TransformFamily,
    pub erm: ErmConfig,
    pub split_seed: u64,
}

impl TransferConfig {
    pub fn new(family: TransformFamily) -> Self {
        Self {
            source_svm: SvmHyper::Practical,
            target_svm: SvmHyper::Practical,
            family,
            erm: ErmConfig::default(),
            split_seed: 0,
        }
    }

    pub fn with_seeds(mut self, split_seed: u64, erm_seed: u64) -> Self {
        self.split_seed = split_seed;
        self.erm.seed = erm_seed;
        self
    }
}

/// The three rules compared on the holdout half, in tie-break order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidate {
    Calibrated,
    TargetOnly,
    SourceOnly,
}

impl Candidate {
    pub const ORDER: [Candidate; 3] = [Candidate::Calibrated, Candidate::TargetOnly, Candidate::SourceOnly];

    pub fn tag(self) -> &'static str {
        match self {
            Candidate::Calibrated => "calibrated",
            Candidate::TargetOnly => "target_only",
            Candidate::SourceOnly => "source_only",
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferFit {
    pub rule_source: DecisionRule,
    pub rule_calibrated: DecisionRule,
    pub rule_target: DecisionRule,
    pub rule_final: DecisionRule,
    pub selection: Candidate,
    /// Holdout risks in `Candidate::ORDER`.
    pub holdout_risks: [f64; 3],
    pub calibration: CalibrationResult,
    pub source_model: Arc<SvmModel>,
    pub target_model: Arc<SvmModel>,
    pub split_seed: u64,
    pub erm_seed: u64,
    pub calibration_rows: Vec<usize>,
    pub holdout_rows: Vec<usize>,
}

impl TransferFit {
    pub fn theta_hat(&self) -> &[f64] {
        &self.calibration.theta_hat
    }

    pub fn final_holdout_risk(&self) -> f64 {
        self.holdout_risks[Candidate::ORDER.iter().position(|c| *c == self.selection).expect("known candidate")]
    }

    pub const SUMMARY_HEADER: [&'static str; 7] =
        ["split_seed", "erm_seed", "theta_hat", "risk_calibrated", "risk_target_only", "risk_source_only", "selection"];

    pub fn summary_record(&self) -> Vec<String> {
        vec![
            self.split_seed.to_string(),
            self.erm_seed.to_string(),
            self.theta_hat().iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            self.holdout_risks[0].to_string(),
            self.holdout_risks[1].to_string(),
            self.holdout_risks[2].to_string(),
            self.selection.tag().to_string(),
        ]
    }

    /// Header plus one summary row.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::SUMMARY_HEADER)?;
        w.write_record(self.summary_record())?;
        w.flush()?;
        Ok(())
    }
}

/// Index of the candidate with the smallest holdout risk (first on ties) and
/// all risks.
pub fn aggregate(candidates: &[DecisionRule], holdout: &Dataset) -> Result<(usize, Vec<f64>)> {
    if candidates.is_empty() {
        return Err(Error::Argument("aggregation needs at least one candidate".into()));
    }
    let risks = candidates.iter().map(|c| weighted_zero_one_risk(c, holdout)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, r) in risks.iter().enumerate() {
        if *r < risks[best] {
            best = i;
        }
    }
    Ok((best, risks))
}

/// Full transfer fit on (possibly weighted) classification data.
pub fn fit_transfer_classifier(source: &Dataset, target: &Dataset, config: &TransferConfig) -> Result<TransferFit> {
    if source.is_empty() {
        return Err(Error::Size("source data is empty".into()));
    }
    if target.len() < 4 {
        return Err(Error::Size(format!("target needs at least 4 rows, got {}", target.len())));
    }
    if source.dim() != target.dim() {
        return Err(Error::Shape { expected: source.dim(), found: target.dim() });
    }
    let source_cfg = config.source_svm.resolve(source.len(), source.dim())?;
    let source_model = Arc::new(train_weighted_svm(source, &source_cfg)?);
    fit_transfer_from_source(source_model, target, config)
}

/// Transfer fit starting from an already trained source SVM; `config.source_svm`
/// is not used.
pub fn fit_transfer_from_source(source_model: Arc<SvmModel>, target: &Dataset, config: &TransferConfig) -> Result<TransferFit> {
    if target.len() < 4 {
        return Err(Error::Size(format!("target needs at least 4 rows, got {}", target.len())));
    }
    if source_model.dim() != target.dim() {
        return Err(Error::Shape { expected: source_model.dim(), found: target.dim() });
    }
    let d = target.dim();
    let rule_source = DecisionRule::from_svm(source_model.clone());

    let split = split_half(target, config.split_seed)?;
    let calibration = calibrate(&rule_source, &config.family, &split.first, &config.erm)?;
    let rule_calibrated = rule_source.with_transform(&config.family, &calibration.theta_hat)?;

    let target_cfg = config.target_svm.resolve(split.first.len(), d)?;
    let target_model = Arc::new(train_weighted_svm(&split.first, &target_cfg)?);
    let rule_target = DecisionRule::from_svm(target_model.clone());

    let candidates = [rule_calibrated.clone(), rule_target.clone(), rule_source.clone()];
    let (best, risks) = aggregate(&candidates, &split.second)?;
    log::debug!("holdout risks {risks:?}, selected {}", Candidate::ORDER[best].tag());

    Ok(TransferFit {
        rule_final: candidates[best].clone(),
        rule_source,
        rule_calibrated,
        rule_target,
        selection: Candidate::ORDER[best],
        holdout_risks: [risks[0], risks[1], risks[2]],
        calibration,
        source_model,
        target_model,
        split_seed: config.split_seed,
        erm_seed: config.erm.seed,
        calibration_rows: split.first_indices,
        holdout_rows: split.second_indices,
    })
}

/// Rate exponent `beta` from margin exponent `alpha` (`f64::INFINITY` allowed)
/// and `gamma_prime = gamma / d`.
pub fn rate_beta(alpha: f64, gamma_prime: f64) -> Result<f64> {
    if !gamma_prime.is_finite() || gamma_prime <= 0.0 {
        return Err(Error::Domain(format!("gamma_prime must be positive and finite, got {gamma_prime}")));
    }
    if alpha.is_nan() || alpha < 0.0 {
        return Err(Error::Domain(format!("alpha must be nonnegative, got {alpha}")));
    }
    let g = gamma_prime;
    if alpha.is_infinite() {
        return Ok(if g <= 0.5 { g / (2.0 * g + 1.0) } else { 2.0 * g / (2.0 * g + 3.0) });
    }
    if alpha == 0.0 || g <= (alpha + 2.0) / (2.0 * alpha) {
        Ok(g / (2.0 * g + 1.0))
    } else {
        Ok(2.0 * g * (alpha + 1.0) / (2.0 * g * (alpha + 2.0) + 3.0 * alpha + 4.0))
    }
}

/// `lambda = n^{-beta (gamma' + d) / gamma'}` and `sigma = n^{beta / gamma'}`.
pub fn schedule_lambda_sigma(n: usize, beta: f64, gamma_prime: f64, d: usize) -> Result<(f64, f64)> {
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if n == 0 || d == 0 || !positive(beta) || !positive(gamma_prime) {
        return Err(Error::Domain("schedule needs positive n, beta, gamma_prime and d".into()));
    }
    let n = n as f64;
    let lambda = n.powf(-beta * (gamma_prime + d as f64) / gamma_prime);
    let sigma = n.powf(beta / gamma_prime);
    Ok((lambda, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Features;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn halfspace_data(n: usize, shift: f64, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)]).collect();
        let labels = rows.iter().map(|x| if 2.0 * x[0] + x[1] + shift >= 0.0 { 1 } else { -1 }).collect();
        Dataset::from_rows(&rows, labels).unwrap()
    }

    #[test]
    fn rate_examples() {
        assert_eq!(rate_beta(1.0, 1.0).unwrap(), 1.0 / 3.0);
        assert_eq!(rate_beta(2.0, 2.0).unwrap(), 6.0 / 13.0);
        assert_eq!(rate_beta(f64::INFINITY, 1.0).unwrap(), 2.0 / 5.0);
        assert_eq!(rate_beta(0.0, 10.0).unwrap(), 10.0 / 21.0);
        assert!(matches!(rate_beta(1.0, 0.0), Err(Error::Domain(_))));
        assert!(rate_beta(-1.0, 1.0).is_err());
    }

    #[test]
    fn infinite_alpha_is_the_limit() {
        for g in [0.2, 0.5, 0.9, 1.0, 3.0] {
            let limit = rate_beta(f64::INFINITY, g).unwrap();
            assert!((rate_beta(1e12, g).unwrap() - limit).abs() < 1e-9, "{g}");
        }
    }

    #[test]
    fn schedule_examples() {
        let (lambda, sigma) = schedule_lambda_sigma(1000, 1.0 / 3.0, 1.0, 5).unwrap();
        assert!((lambda - 1e-6).abs() < 1e-18);
        assert!((sigma - 10.0).abs() < 1e-12);
        assert!(schedule_lambda_sigma(1000, 0.0, 1.0, 5).is_err());
        let sig: Vec<f64> = [100, 1000, 10_000].iter().map(|&n| schedule_lambda_sigma(n, 0.4, 1.0, 3).unwrap().1).collect();
        assert!(sig[0] < sig[1] && sig[1] < sig[2]);
    }

    #[test]
    fn aggregate_picks_first_minimum() {
        let data = Dataset::new(Features::new(vec![-1.0, 1.0], 1).unwrap(), vec![-1, 1], None).unwrap();
        let right = DecisionRule::halfspace(vec![1.0], 0.0).unwrap();
        let wrong = DecisionRule::halfspace(vec![-1.0], 0.0).unwrap();
        let all = DecisionRule::constant(true);
        assert_eq!(aggregate(&[all.clone()], &data).unwrap(), (0, vec![0.5]));
        assert_eq!(aggregate(&[wrong.clone(), right.clone(), right.clone()], &data).unwrap(), (1, vec![1.0, 0.0, 0.0]));
        assert_eq!(aggregate(&[all.clone(), all], &data).unwrap().0, 0);
        assert!(aggregate(&[], &data).is_err());
    }

    #[test]
    fn no_drift_pipeline() {
        let source = halfspace_data(600, 0.0, 1);
        let target = halfspace_data(200, 0.0, 2);
        let cfg = TransferConfig::new(TransformFamily::function_offset(-5.0, 5.0).unwrap()).with_seeds(3, 4);
        let fit = fit_transfer_classifier(&source, &target, &cfg).unwrap();
        assert!(fit.holdout_risks[0] < 0.1 && fit.holdout_risks[2] < 0.1);
        assert_eq!(fit.final_holdout_risk(), fit.holdout_risks.iter().copied().fold(f64::INFINITY, f64::min));
        let again = fit_transfer_classifier(&source, &target, &cfg).unwrap();
        assert_eq!(again.theta_hat(), fit.theta_hat());
        assert_eq!(again.selection, fit.selection);
        let mut buf = Vec::new();
        fit.write_summary_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }

    #[test]
    fn small_target_is_rejected() {
        let source = halfspace_data(50, 0.0, 1);
        let cfg = TransferConfig::new(TransformFamily::function_offset(-5.0, 5.0).unwrap());
        assert!(matches!(fit_transfer_classifier(&source, &halfspace_data(3, 0.0, 2), &cfg), Err(Error::Size(_))));
        assert!(fit_transfer_classifier(&source, &halfspace_data(4, 0.0, 2), &cfg).is_ok());
    }

    #[test]
    fn theoretical_schedule_resolves() {
        let cfg = SvmHyper::Theoretical { alpha: 1.0, gamma_prime: 1.0 }.resolve(1000, 5).unwrap();
        assert!((cfg.sigma - 10.0).abs() < 1e-12);
        assert_eq!(SvmHyper::Practical.resolve(10, 4).unwrap(), SvmConfig::practical(10, 4));
    }
}
