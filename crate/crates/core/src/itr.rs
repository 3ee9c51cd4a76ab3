//! Individualized treatment rules as weighted classification.
//!
//! Maximizing the IPW value `E[R I(T = g(X)) / p_T(X)]` is the same as
//! minimizing the weighted 0-1 risk with weight `W = R / p_T` and label `T`.
//! Negative rewards are folded into nonnegative weights by flipping the
//! label, which shifts the objective by a constant and changes nothing else.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::dataset::{Dataset, Features, ItrDataset};
use crate::error::{Error, Result};
use crate::pipeline::{fit_transfer_classifier, TransferConfig, TransferFit};
use crate::rules::DecisionRule;

const PROPENSITY_FLOOR: f64 = 1e-6;
const LOGIT_ITERATIONS: usize = 100;
const LOGIT_GRADIENT_TOLERANCE: f64 = 1e-8;

/// `R / pi` for treated rows and `R / (1 - pi)` for controls.
pub fn itr_weight(treatment: i8, reward: f64, propensity: f64) -> Result<f64> {
    if !(propensity > 0.0 && propensity < 1.0) {
        return Err(Error::Overlap { c0: 0.0, count: 1, rows: Vec::new() });
    }
    Ok(if treatment == 1 { reward / propensity } else { reward / (1.0 - propensity) })
}

/// Nonnegative weights, possibly flipped labels and the per-row constants
/// with `W_i I(T_i != g) = weight_i I(label_i != g) + constant_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ItrWeighting {
    pub raw: Vec<f64>,
    pub weights: Vec<f64>,
    pub labels: Vec<i8>,
    pub constants: Vec<f64>,
}

impl ItrWeighting {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `(1/n) sum_i constant_i`.
    pub fn mean_constant(&self) -> f64 {
        self.constants.iter().sum::<f64>() / self.len() as f64
    }

    pub fn to_dataset(&self, features: &Features) -> Result<Dataset> {
        Dataset::new(features.clone(), self.labels.clone(), Some(self.weights.clone()))
    }
}

pub fn make_weighting(data: &ItrDataset) -> Result<ItrWeighting> {
    let pi = data
        .propensities()
        .ok_or_else(|| Error::InvalidData("propensities are required; fit them first".into()))?;
    let n = data.len();
    let mut out = ItrWeighting {
        raw: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        labels: Vec::with_capacity(n),
        constants: Vec::with_capacity(n),
    };
    for i in 0..n {
        let t = data.treatments()[i];
        let w = itr_weight(t, data.rewards()[i], pi[i]).map_err(|_| Error::Propensity { row: i + 1, value: pi[i] })?;
        out.raw.push(w);
        out.weights.push(w.abs());
        out.labels.push(if w >= 0.0 { t } else { -t });
        out.constants.push(w.min(0.0));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropensityModel {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub ridge: f64,
}

impl PropensityModel {
    /// `P(T = +1 | x)`, clamped to `[1e-6, 1 - 1e-6]`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() + 1 != self.coefficients.len() {
            return Err(Error::Shape { expected: self.coefficients.len() - 1, found: x.len() });
        }
        let eta = self.coefficients[0] + self.coefficients[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        Ok(logistic(eta).clamp(PROPENSITY_FLOOR, 1.0 - PROPENSITY_FLOOR))
    }

    pub fn predict_all(&self, features: &Features) -> Result<Vec<f64>> {
        features.rows().map(|x| self.predict(x)).collect()
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Ridge-stabilised logistic regression of `T = +1` on `[1, x]` by IRLS.
///
/// Separated data has no finite maximizer: the fit stops with
/// `converged = false` once any fitted probability leaves
/// `[1e-6, 1 - 1e-6]`, and predictions are clamped.
pub fn fit_logistic_propensity(features: &Features, treatments: &[i8], ridge: f64) -> Result<PropensityModel> {
    let n = features.n_rows();
    if treatments.len() != n {
        return Err(Error::Shape { expected: n, found: treatments.len() });
    }
    if n == 0 {
        return Err(Error::Size("no rows to fit propensities".into()));
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(Error::Argument(format!("ridge must be nonnegative, got {ridge}")));
    }
    let p = features.dim() + 1;
    let x = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { features.row(i)[j - 1] });
    let y = DVector::from_iterator(n, treatments.iter().map(|&t| if t == 1 { 1.0 } else { 0.0 }));
    let mut beta = DVector::zeros(p);
    let extreme = ((1.0 - PROPENSITY_FLOOR) / PROPENSITY_FLOOR).ln();

    let mut iterations = 0;
    let mut converged = false;
    let mut separated = false;
    while iterations < LOGIT_ITERATIONS {
        let eta = &x * &beta;
        if eta.iter().any(|e| e.abs() > extreme) {
            separated = true;
            break;
        }
        let mu = eta.map(logistic);
        let gradient = x.transpose() * (&y - &mu) - &beta * ridge;
        if gradient.norm() < LOGIT_GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        let w = mu.map(|m| m * (1.0 - m));
        let mut hessian = x.transpose() * DMatrix::from_fn(n, p, |i, j| w[i] * x[(i, j)]);
        for k in 0..p {
            hessian[(k, k)] += ridge;
        }
        let Some(step) = hessian.clone().cholesky().map(|c| c.solve(&gradient)).or_else(|| hessian.lu().solve(&gradient))
        else {
            separated = true;
            break;
        };
        if step.iter().any(|v| !v.is_finite()) {
            separated = true;
            break;
        }
        beta += step;
        iterations += 1;
    }
    if separated {
        log::warn!("propensity model hit separation after {iterations} iterations; predictions are clamped");
    }
    Ok(PropensityModel { coefficients: beta.iter().copied().collect(), iterations, converged: converged && !separated, ridge })
}

/// Use supplied propensities, or fit a logistic model when they are missing.
pub fn ensure_propensities(data: ItrDataset, ridge: f64) -> Result<(ItrDataset, Option<PropensityModel>)> {
    if data.propensities().is_some() {
        return Ok((data, None));
    }
    let model = fit_logistic_propensity(data.features(), data.treatments(), ridge)?;
    let pi = model.predict_all(data.features())?;
    Ok((data.with_propensities(pi)?, Some(model)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItrOptions {
    /// Strict overlap level: every propensity must lie in `[c0, 1 - c0]`.
    pub c0: f64,
    /// Declared bound `M` with `|R| <= M`, checked when present.
    pub reward_bound: Option<f64>,
}

impl Default for ItrOptions {
    fn default() -> Self {
        Self { c0: 0.01, reward_bound: None }
    }
}

/// Transfer fit for treatment rules: the classification pipeline on the
/// flip-transformed weighted problems of both populations.
pub fn fit_transfer_itr(source: &ItrDataset, target: &ItrDataset, config: &TransferConfig, options: &ItrOptions) -> Result<TransferFit> {
    for data in [source, target] {
        data.check_overlap(options.c0)?;
        if let Some(m) = options.reward_bound {
            data.check_reward_bound(m)?;
        }
    }
    let source_w = make_weighting(source)?.to_dataset(source.features())?;
    let target_w = make_weighting(target)?.to_dataset(target.features())?;
    fit_transfer_classifier(&source_w, &target_w, config)
}

/// IPW value `(1/n) sum R_i I(T_i = g(X_i)) / p_{T_i}(X_i)`.
pub fn estimate_value(rule: &DecisionRule, data: &ItrDataset) -> Result<f64> {
    Ok(value_parts(rule, data)?.value)
}

struct ValueParts {
    value: f64,
    mean_factor: f64,
    share_treated: f64,
}

fn value_parts(rule: &DecisionRule, data: &ItrDataset) -> Result<ValueParts> {
    let pi = data.propensities().ok_or_else(|| Error::InvalidData("propensities are required".into()))?;
    let g = rule.labels_for(data.features())?;
    let (mut total, mut factor_sum, mut agree, mut treated) = (0.0, 0.0, 0usize, 0usize);
    for i in 0..data.len() {
        let t = data.treatments()[i];
        if g[i] == 1 {
            treated += 1;
        }
        if g[i] == t {
            let p = if t == 1 { pi[i] } else { 1.0 - pi[i] };
            total += data.rewards()[i] / p;
            factor_sum += 1.0 / p;
            agree += 1;
        }
    }
    let n = data.len() as f64;
    Ok(ValueParts {
        value: total / n,
        mean_factor: if agree > 0 { factor_sum / agree as f64 } else { 0.0 },
        share_treated: treated as f64 / n,
    })
}

/// One line of a value report.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueRow {
    pub rule: String,
    pub value: f64,
    pub n: usize,
    /// Mean inverse-propensity factor over rows whose treatment agrees with the rule.
    pub mean_weight: f64,
    pub share_treated: f64,
}

pub fn value_row(tag: &str, rule: &DecisionRule, data: &ItrDataset) -> Result<ValueRow> {
    let parts = value_parts(rule, data)?;
    Ok(ValueRow {
        rule: tag.to_string(),
        value: parts.value,
        n: data.len(),
        mean_weight: parts.mean_factor,
        share_treated: parts.share_treated,
    })
}

pub fn write_value_report<W: Write>(rows: &[ValueRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rule", "value", "n", "mean_weight", "share_treated"])?;
    for r in rows {
        w.write_record([
            r.rule.clone(),
            r.value.to_string(),
            r.n.to_string(),
            r.mean_weight.to_string(),
            r.share_treated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
