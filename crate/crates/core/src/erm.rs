//! Weighted 0-1 empirical risk minimization over a transform parameter.
//!
//! The objective is piecewise constant in `theta`, so a single simplex run
//! stalls on the first plateau it lands on. `calibrate` runs box-projected
//! Nelder-Mead from a Latin hypercube of starts plus `theta = 0`, and for pure
//! score-offset families also scans every distinct threshold interval.

use std::cmp::Ordering;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rules::{DecisionRule, ParamBox, TransformFamily};

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Stop once every vertex is within this sup-norm distance of the best one.
    pub simplex_tolerance: f64,
    pub max_evals: usize,
    /// Initial edge length as a fraction of each box side.
    pub initial_step: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            simplex_tolerance: 1e-6,
            max_evals: 1000,
            initial_step: 0.1,
        }
    }
}

impl NelderMeadConfig {
    pub fn validate(&self) -> Result<()> {
        let coeffs = [self.reflection, self.expansion, self.contraction, self.shrink, self.initial_step];
        if coeffs.iter().any(|c| !c.is_finite() || *c <= 0.0) {
            return Err(Error::Argument("Nelder-Mead coefficients must be positive".into()));
        }
        if self.contraction >= 1.0 || self.shrink >= 1.0 || self.expansion <= 1.0 {
            return Err(Error::Argument("need contraction, shrink < 1 < expansion".into()));
        }
        if !(self.simplex_tolerance >= 0.0) || self.max_evals == 0 {
            return Err(Error::Argument("invalid Nelder-Mead stopping rule".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub iterations: usize,
    /// Best vertex value after each iteration.
    pub best_trace: Vec<f64>,
}

/// Box-projected Nelder-Mead. Every trial point is clamped onto `bounds`.
pub fn nelder_mead<F>(objective: F, start: &[f64], bounds: &ParamBox, config: &NelderMeadConfig) -> Result<NelderMeadResult>
where
    F: Fn(&[f64]) -> f64,
{
    config.validate()?;
    let p = bounds.dim();
    if start.len() != p {
        return Err(Error::Shape { expected: p, found: start.len() });
    }
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        objective(x)
    };
    let project = |mut x: Vec<f64>| {
        bounds.clamp(&mut x);
        x
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(p + 1);
    let x0 = project(start.to_vec());
    let f0 = eval(&x0);
    simplex.push((x0.clone(), f0));
    for k in 0..p {
        let width = bounds.upper()[k] - bounds.lower()[k];
        let step = config.initial_step * width;
        let mut x = x0.clone();
        x[k] = if x0[k] + step <= bounds.upper()[k] { x0[k] + step } else { x0[k] - step };
        let x = project(x);
        let f = eval(&x);
        simplex.push((x, f));
    }

    let order = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut best_trace = Vec::new();
    let mut iterations = 0usize;
    loop {
        order(&mut simplex);
        best_trace.push(simplex[0].1);
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= config.simplex_tolerance || evaluations.get() >= config.max_evals {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; p];
        for (x, _) in &simplex[..p] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / p as f64;
            }
        }
        let along = |t: f64, towards: &[f64]| -> Vec<f64> {
            project(centroid.iter().zip(towards).map(|(c, w)| c + t * (w - c)).collect())
        };
        let worst = simplex[p].0.clone();
        let (f_best, f_second, f_worst) = (simplex[0].1, simplex[p - 1].1, simplex[p].1);

        let xr = along(-config.reflection, &worst);
        let fr = eval(&xr);
        let mut replacement = None;
        if fr < f_best {
            let xe = along(-config.reflection * config.expansion, &worst);
            let fe = eval(&xe);
            replacement = Some(if fe < fr { (xe, fe) } else { (xr, fr) });
        } else if fr < f_second {
            replacement = Some((xr, fr));
        } else if fr < f_worst {
            let xc = along(-config.reflection * config.contraction, &worst);
            let fc = eval(&xc);
            if fc <= fr {
                replacement = Some((xc, fc));
            }
        } else {
            let xcc = along(config.contraction, &worst);
            let fcc = eval(&xcc);
            if fcc < f_worst {
                replacement = Some((xcc, fcc));
            }
        }
        match replacement {
            Some(v) => simplex[p] = v,
            None => {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = project(best.iter().zip(&vertex.0).map(|(b, v)| b + config.shrink * (v - b)).collect());
                    let f = eval(&x);
                    *vertex = (x, f);
                }
            }
        }
    }
    let (point, value) = simplex.swap_remove(0);
    Ok(NelderMeadResult { point, value, evaluations: evaluations.get(), iterations, best_trace })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErmConfig {
    /// Latin hypercube starts in addition to `theta = 0`; `None` means `max(20, 10 p)`.
    pub n_starts: Option<usize>,
    pub nelder_mead: NelderMeadConfig,
    pub seed: u64,
}

impl Default for ErmConfig {
    fn default() -> Self {
        Self { n_starts: None, nelder_mead: NelderMeadConfig::default(), seed: 0x0e77 }
    }
}

impl ErmConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn starts_for(&self, p: usize) -> usize {
        self.n_starts.unwrap_or_else(|| 20.max(10 * p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartOrigin {
    Zero,
    LatinHypercube,
    ThresholdScan,
}

impl StartOrigin {
    pub fn tag(self) -> &'static str {
        match self {
            StartOrigin::Zero => "zero",
            StartOrigin::LatinHypercube => "lhs",
            StartOrigin::ThresholdScan => "scan",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartRecord {
    pub origin: StartOrigin,
    pub start: Vec<f64>,
    pub finish: Vec<f64>,
    pub risk: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub theta_hat: Vec<f64>,
    pub achieved_risk: f64,
    pub risk_at_zero: f64,
    pub starts_log: Vec<StartRecord>,
    /// All labels identical: the risk landscape carries no information about `theta`.
    pub degenerate_labels: bool,
}

impl CalibrationResult {
    /// One row per start: `origin,start,finish,risk`, vectors joined by `;`.
    pub fn write_starts_csv<W: Write>(&self, out: W) -> Result<()> {
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["origin", "start", "finish", "risk"])?;
        for r in &self.starts_log {
            w.write_record([r.origin.tag().to_string(), join(&r.start), join(&r.finish), r.risk.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `(1/n) sum_i w_i I(y_i != predicted_i)` summed in row order.
pub(crate) fn risk_of_labels(data: &Dataset, predicted: impl IntoIterator<Item = i8>) -> f64 {
    let mut total = 0.0;
    for (i, yhat) in predicted.into_iter().enumerate() {
        if data.label(i) != yhat {
            total += data.weight(i);
        }
    }
    total / data.len() as f64
}

/// Weighted empirical 0-1 risk of a rule; weights default to 1.
pub fn weighted_zero_one_risk(rule: &DecisionRule, data: &Dataset) -> Result<f64> {
    Ok(risk_of_labels(data, rule.labels_for(data.features())?))
}

/// Ordering used to pick among candidate minimizers.
fn candidate_order(a: (&[f64], f64), b: (&[f64], f64)) -> Ordering {
    let norm = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>();
    a.1.total_cmp(&b.1).then(norm(a.0).total_cmp(&norm(b.0))).then_with(|| {
        a.0.iter().zip(b.0).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
    })
}

/// Risk evaluation specialised to the score-offset family, matching the rule
/// path bit for bit: a row is accepted iff `v_i + (o + theta) >= 0`.
struct OffsetScores {
    values: Vec<f64>,
    offset: f64,
}

impl OffsetScores {
    fn new(base: &DecisionRule, data: &Dataset) -> Result<Option<Self>> {
        let mut buf = Vec::new();
        let mut values = Vec::with_capacity(data.len());
        let mut offset = 0.0;
        for x in data.features().rows() {
            let (v, o) = base.split_value(x, &mut buf);
            let Some(v) = v else { return Ok(None) };
            values.push(v);
            offset = o;
        }
        Ok(Some(Self { values, offset }))
    }

    fn risk(&self, data: &Dataset, theta: f64) -> f64 {
        let shift = self.offset + theta;
        risk_of_labels(data, self.values.iter().map(|v| if v + shift >= 0.0 { 1 } else { -1 }))
    }

    /// One representative `theta` per distinct classification reachable inside
    /// `[lo, hi]`: zero when it is interior to the interval, else the midpoint.
    fn scan(&self, data: &Dataset, lo: f64, hi: f64) -> Vec<f64> {
        let n = self.values.len();
        let mut order: Vec<usize> = (0..n).collect();
        let tau: Vec<f64> = self.values.iter().map(|v| -v - self.offset).collect();
        order.sort_by(|&a, &b| tau[a].total_cmp(&tau[b]));

        // risk with nobody accepted, then update as thresholds are crossed
        let mut cuts = vec![f64::NEG_INFINITY];
        let mut risks = Vec::with_capacity(n + 1);
        let mut current: f64 = (0..n).filter(|&i| data.label(i) == 1).map(|i| data.weight(i)).sum();
        risks.push(current);
        let mut k = 0;
        while k < n {
            let t = tau[order[k]];
            while k < n && tau[order[k]] == t {
                let i = order[k];
                current += if data.label(i) == 1 { -data.weight(i) } else { data.weight(i) };
                k += 1;
            }
            cuts.push(t);
            risks.push(current);
        }
        cuts.push(f64::INFINITY);

        let mut reps = Vec::new();
        for j in 0..risks.len() {
            let (a, b) = (cuts[j].max(lo), cuts[j + 1].min(hi));
            if a > b || (a == b && lo < hi) {
                continue;
            }
            let rep = if a < 0.0 && 0.0 < b { 0.0 } else { 0.5 * (a + b) };
            reps.push((rep, risks[j]));
        }
        let best = reps.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let slack = 1e-9 * data.total_weight().max(1.0);
        reps.into_iter().filter(|r| r.1 <= best + slack).map(|r| r.0).collect()
    }
}

fn latin_hypercube(bounds: &ParamBox, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let p = bounds.dim();
    let mut points = vec![vec![0.0; p]; n];
    for k in 0..p {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        let (lo, hi) = (bounds.lower()[k], bounds.upper()[k]);
        for (point, s) in points.iter_mut().zip(strata) {
            let u = (s as f64 + rng.random::<f64>()) / n as f64;
            point[k] = lo + u * (hi - lo);
        }
    }
    points
}

/// Fit `theta_hat = argmin_theta R_n(h(base, theta))` over the family's box.
pub fn calibrate(base: &DecisionRule, family: &TransformFamily, data: &Dataset, config: &ErmConfig) -> Result<CalibrationResult> {
    config.nelder_mead.validate()?;
    let bounds = family.bounds();
    let p = family.parameter_dim();
    // validates dimensions and transform support once
    base.with_transform(family, &vec![0.0; p])?;

    let offset = if family.is_function_offset() { OffsetScores::new(base, data)? } else { None };
    let objective = |theta: &[f64]| -> f64 {
        match &offset {
            Some(s) => s.risk(data, theta[0]),
            None => base
                .with_transform(family, theta)
                .and_then(|r| weighted_zero_one_risk(&r, data))
                .unwrap_or(f64::INFINITY),
        }
    };

    let mut zero = vec![0.0; p];
    bounds.clamp(&mut zero);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = vec![(StartOrigin::Zero, zero)];
    starts.extend(
        latin_hypercube(bounds, config.starts_for(p), &mut rng).into_iter().map(|s| (StartOrigin::LatinHypercube, s)),
    );

    let mut log: Vec<StartRecord> = starts
        .par_iter()
        .map(|(origin, start)| {
            nelder_mead(objective, start, bounds, &config.nelder_mead)
                .map(|r| StartRecord { origin: *origin, start: start.clone(), finish: r.point, risk: r.value })
        })
        .collect::<Result<_>>()?;
    if let Some(s) = &offset {
        for theta in s.scan(data, bounds.lower()[0], bounds.upper()[0]) {
            let risk = s.risk(data, theta);
            log.push(StartRecord { origin: StartOrigin::ThresholdScan, start: vec![theta], finish: vec![theta], risk });
        }
    }

    let best = log
        .iter()
        .min_by(|a, b| candidate_order((&a.finish, a.risk), (&b.finish, b.risk)))
        .expect("at least one start");
    let theta_hat = best.finish.clone();
    let achieved_risk = weighted_zero_one_risk(&base.with_transform(family, &theta_hat)?, data)?;
    let risk_at_zero = objective(&log[0].start);
    let degenerate_labels = data.labels().iter().all(|&y| y == data.label(0));
    if degenerate_labels {
        log::warn!("calibration data has a single label; theta_hat is not identified");
    }
    Ok(CalibrationResult { theta_hat, achieved_risk, risk_at_zero, starts_log: log, degenerate_labels })
}
