//! Synthetic source and target populations with known Bayes rules.
//!
//! Features are uniform on `[-3, 3]^d`. The source Bayes rule is a halfspace
//! `{beta' x > 0}` with `beta = (3, 1, ..., 1)` or the quadratic cone
//! `{x' Q x > 0}`; target populations translate or rotate it. Labels follow a
//! regression function of the boundary score `s(x)`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{write_classification_csv, Dataset, Features};
use crate::error::{Error, Result};
use crate::geometry::{boundary_distance, McEstimate};
use crate::rules::{DecisionRule, TransformFamily};
use crate::seed::derive_seed;

const BAYES_RISK_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// `{beta' x > 0}`; `beta` defaults to `(3, 1, ..., 1)`.
    Linear {
        #[serde(default)]
        beta: Option<Vec<f64>>,
    },
    /// `{x' Q x > 0}` with `Q[0,0] = 0.3`, `Q[1,2] = Q[2,1] = 0.5`.
    Quadratic,
}

fn default_noise_sd() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Drift {
    /// Score becomes `theta + s(x)`.
    Translation,
    /// Score becomes `s(P(theta) x)` with `P` a rotation in the first two coordinates.
    Rotation,
    /// Score becomes `theta + s(x) - eps`, with `eps ~ N(0, noise_sd^2)` where
    /// `s(x) > 0` and `eps = 0` elsewhere. Deterministic labels only.
    NoisyTranslation {
        #[serde(default = "default_noise_sd")]
        noise_sd: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regression {
    Deterministic,
    Linear,
    Logistic,
    Truncate,
    Truncatelogit,
}

impl Regression {
    pub fn tag(self) -> &'static str {
        match self {
            Regression::Deterministic => "deterministic",
            Regression::Linear => "linear",
            Regression::Logistic => "logistic",
            Regression::Truncate => "truncate",
            Regression::Truncatelogit => "truncatelogit",
        }
    }

    /// `eta` as a function of the boundary score `s`; `scale` is `sup |s|` over the cube.
    pub fn eta(self, s: f64, scale: f64) -> f64 {
        let sign = if s > 0.0 { 1.0 } else if s < 0.0 { -1.0 } else { 0.0 };
        match self {
            Regression::Deterministic => {
                if s >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Regression::Linear => (0.5 + s / (2.0 * scale)).clamp(0.0, 1.0),
            Regression::Logistic => logistic(s),
            Regression::Truncate => (0.5 + sign * (s.abs() / (2.0 * scale)).max(0.1)).clamp(0.0, 1.0),
            Regression::Truncatelogit => (0.5 + sign * (logistic(s) - 0.5).abs().max(0.1)).clamp(0.0, 1.0),
        }
    }
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSetting {
    pub boundary: Boundary,
    pub drift: Drift,
    pub regression: Regression,
    /// Drift magnitude; ignored for the source role.
    pub theta: f64,
    pub d: usize,
    pub n: usize,
    pub role: Role,
    pub seed: u64,
}

impl SimSetting {
    /// Linear boundary, translation, logistic labels.
    pub fn linear_translation(d: usize, theta: f64, n: usize, role: Role, seed: u64) -> Self {
        Self {
            boundary: Boundary::Linear { beta: None },
            drift: Drift::Translation,
            regression: Regression::Logistic,
            theta,
            d,
            n,
            role,
            seed,
        }
    }

    /// Linear boundary, noisy translation, deterministic labels.
    pub fn noisy_translation(d: usize, theta: f64, n: usize, role: Role, seed: u64) -> Self {
        Self {
            drift: Drift::NoisyTranslation { noise_sd: default_noise_sd() },
            regression: Regression::Deterministic,
            ..Self::linear_translation(d, theta, n, role, seed)
        }
    }

    /// Quadratic boundary, rotation, deterministic labels.
    pub fn quadratic_rotation(d: usize, theta: f64, n: usize, role: Role, seed: u64) -> Self {
        Self {
            boundary: Boundary::Quadratic,
            drift: Drift::Rotation,
            regression: Regression::Deterministic,
            ..Self::linear_translation(d, theta, n, role, seed)
        }
    }

    pub fn with_regression(mut self, regression: Regression) -> Self {
        self.regression = regression;
        self
    }

    pub fn with_role(mut self, role: Role, n: usize, seed: u64) -> Self {
        self.role = role;
        self.n = n;
        self.seed = seed;
        self
    }

    pub fn tag(&self) -> String {
        let b = match self.boundary {
            Boundary::Linear { .. } => "linear",
            Boundary::Quadratic => "quadratic",
        };
        let t = match self.drift {
            Drift::Translation => "translation",
            Drift::Rotation => "rotation",
            Drift::NoisyTranslation { .. } => "noisy_translation",
        };
        format!("{b}-{t}-{}", self.regression.tag())
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::Argument("dimension must be positive".into()));
        }
        if self.n == 0 {
            return Err(Error::Argument("sample size must be positive".into()));
        }
        if !self.theta.is_finite() {
            return Err(Error::Argument("theta must be finite".into()));
        }
        match &self.boundary {
            Boundary::Quadratic if self.d < 3 => return Err(Error::DimensionUnsupported(self.d)),
            Boundary::Linear { beta: Some(b) } if b.len() != self.d => {
                return Err(Error::Shape { expected: self.d, found: b.len() })
            }
            _ => {}
        }
        match self.drift {
            Drift::Rotation if self.d < 2 => {
                return Err(Error::Argument("rotation needs at least two coordinates".into()))
            }
            Drift::NoisyTranslation { noise_sd } => {
                if !(noise_sd > 0.0) || !noise_sd.is_finite() {
                    return Err(Error::Argument("noise_sd must be positive".into()));
                }
                if self.regression != Regression::Deterministic {
                    return Err(Error::Argument("noisy translation is defined for deterministic labels".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn beta(&self) -> Vec<f64> {
        match &self.boundary {
            Boundary::Linear { beta: Some(b) } => b.clone(),
            _ => default_beta(self.d),
        }
    }

    /// `sup |s(x)|` of the untransformed score over `[-3, 3]^d`.
    pub fn scale(&self) -> f64 {
        match self.boundary {
            Boundary::Linear { .. } => 3.0 * self.beta().iter().map(|b| b.abs()).sum::<f64>(),
            Boundary::Quadratic => 9.0 * quadratic_matrix(self.d).iter().map(|q| q.abs()).sum::<f64>(),
        }
    }

    /// The source Bayes rule.
    pub fn source_rule(&self) -> Result<DecisionRule> {
        match self.boundary {
            Boundary::Linear { .. } => DecisionRule::halfspace(self.beta(), 0.0),
            Boundary::Quadratic => DecisionRule::quadratic(quadratic_matrix(self.d), self.d),
        }
    }

    /// Bayes rule of the population this setting describes.
    pub fn bayes_rule(&self) -> Result<DecisionRule> {
        self.validate()?;
        let base = self.source_rule()?;
        if self.role == Role::Source {
            return Ok(base);
        }
        let reach = self.theta.abs() + 1.0;
        match (&self.boundary, &self.drift) {
            (Boundary::Linear { .. }, Drift::Translation | Drift::NoisyTranslation { .. }) => {
                DecisionRule::halfspace(self.beta(), self.theta)
            }
            (Boundary::Quadratic, Drift::Translation | Drift::NoisyTranslation { .. }) => {
                base.with_transform(&TransformFamily::function_offset(-reach, reach)?, &[self.theta])
            }
            (_, Drift::Rotation) => base.with_transform(&TransformFamily::coordinate_rotation(0, 1, -reach, reach)?, &[self.theta]),
        }
    }
}

pub fn default_beta(d: usize) -> Vec<f64> {
    let mut b = vec![1.0; d];
    if d > 0 {
        b[0] = 3.0;
    }
    b
}

/// Row-major `d x d` matrix with `Q[0,0] = 0.3`, `Q[1,2] = Q[2,1] = 0.5`.
pub fn quadratic_matrix(d: usize) -> Vec<f64> {
    let mut q = vec![0.0; d * d];
    if d >= 3 {
        q[0] = 0.3;
        q[d + 2] = 0.5;
        q[2 * d + 1] = 0.5;
    }
    q
}

/// Law of the features.
#[derive(Debug, Clone, PartialEq)]
pub enum Marginal {
    Cube { d: usize, half_width: f64 },
    UnitBall { d: usize },
}

impl Marginal {
    pub fn dim(&self) -> usize {
        match self {
            Marginal::Cube { d, .. } | Marginal::UnitBall { d } => *d,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            Marginal::Cube { half_width, .. } => {
                for v in out.iter_mut() {
                    *v = rng.random_range(-half_width..*half_width);
                }
            }
            Marginal::UnitBall { d } => loop {
                for v in out.iter_mut() {
                    *v = StandardNormal.sample(rng);
                }
                let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    continue;
                }
                let radius = rng.random::<f64>().powf(1.0 / *d as f64);
                out.iter_mut().for_each(|v| *v *= radius / norm);
                break;
            },
        }
    }
}

/// `eta(x) = P(Y = 1 | X = x)` of a generated population.
#[derive(Debug, Clone)]
pub enum Oracle {
    Score {
        rule: DecisionRule,
        regression: Regression,
        scale: f64,
    },
    NoisyScore {
        source: DecisionRule,
        theta: f64,
        noise_sd: f64,
    },
    /// `1/2 + 1/2 sign(beta' x) |beta' x|^t`.
    Example1 { beta: Vec<f64>, t: f64 },
}

impl Oracle {
    pub fn eta(&self, x: &[f64]) -> Result<f64> {
        match self {
            Oracle::Score { rule, regression, scale } => {
                let s = rule.decision_value(x)?.expect("score rules have decision values");
                Ok(regression.eta(s, *scale))
            }
            Oracle::NoisyScore { source, theta, noise_sd } => {
                let b = source.decision_value(x)?.expect("score rules have decision values");
                Ok(if b > 0.0 {
                    normal_cdf((theta + b) / noise_sd)
                } else if theta + b >= 0.0 {
                    1.0
                } else {
                    0.0
                })
            }
            Oracle::Example1 { beta, t } => {
                if beta.len() != x.len() {
                    return Err(Error::Shape { expected: beta.len(), found: x.len() });
                }
                let s: f64 = beta.iter().zip(x).map(|(b, v)| b * v).sum();
                let sign = if s > 0.0 { 1.0 } else if s < 0.0 { -1.0 } else { 0.0 };
                Ok((0.5 + 0.5 * sign * s.abs().powf(*t)).clamp(0.0, 1.0))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub dataset: Dataset,
    pub bayes_rule: DecisionRule,
    pub oracle: Oracle,
    pub marginal: Marginal,
    /// Monte Carlo `E[min(eta, 1 - eta)]`.
    pub bayes_risk_estimate: f64,
}

impl GeneratedData {
    pub fn eta(&self, x: &[f64]) -> Result<f64> {
        self.oracle.eta(x)
    }

    pub fn bayes_risk(&self, n_mc: usize, seed: u64) -> Result<McEstimate> {
        bayes_risk(&self.oracle, &self.marginal, n_mc, seed)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_classification_csv(&self.dataset, out)
    }
}

fn bayes_risk(oracle: &Oracle, marginal: &Marginal, n_mc: usize, seed: u64) -> Result<McEstimate> {
    if n_mc < 2 {
        return Err(Error::Argument("need at least two Monte Carlo draws".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; marginal.dim()];
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n_mc {
        marginal.sample(&mut rng, &mut x);
        let eta = oracle.eta(&x)?;
        let v = eta.min(1.0 - eta);
        sum += v;
        sq += v * v;
    }
    let n = n_mc as f64;
    let mean = sum / n;
    let var = (sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(McEstimate { value: mean, std_error: (var / n).sqrt() })
}

fn draw(oracle: &Oracle, rule: &DecisionRule, marginal: &Marginal, n: usize, seed: u64, noise: Option<(&DecisionRule, f64, f64)>, deterministic: bool) -> Result<Dataset> {
    let d = marginal.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    let mut x = vec![0.0; d];
    for _ in 0..n {
        marginal.sample(&mut rng, &mut x);
        let y = match (noise, deterministic) {
            (Some((source, theta, sd)), _) => {
                let b = source.decision_value(&x)?.expect("score rules have decision values");
                let eps: f64 = if b > 0.0 { sd * Distribution::<f64>::sample(&StandardNormal, &mut rng) } else { 0.0 };
                theta + b - eps >= 0.0
            }
            (None, true) => rule.membership(&x)?,
            (None, false) => rng.random::<f64>() < oracle.eta(&x)?,
        };
        data.extend_from_slice(&x);
        labels.push(if y { 1 } else { -1 });
    }
    Dataset::new(Features::new(data, d)?, labels, None)
}

/// Draw `n` labelled points from the population described by `setting`.
pub fn generate(setting: &SimSetting) -> Result<GeneratedData> {
    setting.validate()?;
    let bayes_rule = setting.bayes_rule()?;
    let marginal = Marginal::Cube { d: setting.d, half_width: 3.0 };
    let noisy = match (setting.role, &setting.drift) {
        (Role::Target, Drift::NoisyTranslation { noise_sd }) => Some(*noise_sd),
        _ => None,
    };
    let source = setting.source_rule()?;
    let oracle = match noisy {
        Some(noise_sd) => Oracle::NoisyScore { source: source.clone(), theta: setting.theta, noise_sd },
        None => Oracle::Score { rule: bayes_rule.clone(), regression: setting.regression, scale: setting.scale() },
    };
    let dataset = draw(
        &oracle,
        &bayes_rule,
        &marginal,
        setting.n,
        setting.seed,
        noisy.map(|sd| (&source, setting.theta, sd)),
        setting.regression == Regression::Deterministic,
    )?;
    let risk = bayes_risk(&oracle, &marginal, BAYES_RISK_SAMPLES, derive_seed(setting.seed, &[0xb])).map(|r| r.value)?;
    Ok(GeneratedData { dataset, bayes_rule, oracle, marginal, bayes_risk_estimate: risk })
}

/// Features uniform on the unit ball and `eta = 1/2 + 1/2 sign(x_1) |x_1|^t`.
pub fn example1_sampler(t_exponent: f64, d: usize, n: usize, seed: u64) -> Result<GeneratedData> {
    let mut beta = vec![0.0; d];
    if d == 0 {
        return Err(Error::Argument("dimension must be positive".into()));
    }
    beta[0] = 1.0;
    example1_with_direction(t_exponent, beta, n, seed)
}

/// As `example1_sampler` with a general unit direction `beta`.
pub fn example1_with_direction(t_exponent: f64, beta: Vec<f64>, n: usize, seed: u64) -> Result<GeneratedData> {
    if !(t_exponent > 0.0) || !t_exponent.is_finite() {
        return Err(Error::Argument(format!("t must be positive, got {t_exponent}")));
    }
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    if beta.is_empty() || (norm - 1.0).abs() > 1e-9 {
        return Err(Error::Argument("beta must be a unit vector".into()));
    }
    let d = beta.len();
    let marginal = Marginal::UnitBall { d };
    let bayes_rule = DecisionRule::halfspace(beta.clone(), 0.0)?;
    let oracle = Oracle::Example1 { beta, t: t_exponent };
    let dataset = draw(&oracle, &bayes_rule, &marginal, n.max(1), seed, None, false)?;
    let risk = bayes_risk(&oracle, &marginal, BAYES_RISK_SAMPLES, derive_seed(seed, &[0xb]))?.value;
    Ok(GeneratedData { dataset, bayes_rule, oracle, marginal, bayes_risk_estimate: risk })
}

pub const DEFAULT_T_GRID: [f64; 4] = [0.05, 0.1, 0.2, 0.4];

/// Log-log fit of a tail estimate against `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    /// `f64::INFINITY` when fewer than two grid points have positive mass.
    pub slope: f64,
    pub intercept: f64,
    /// `(t, estimate)` for every grid point, including empty ones.
    pub points: Vec<(f64, f64)>,
    pub dropped: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ExponentFit {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "estimate"])?;
        for (t, e) in &self.points {
            w.write_record([t.to_string(), e.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_grid(t_grid: &[f64], n_mc: usize) -> Result<()> {
    if t_grid.len() < 4 {
        return Err(Error::Argument("exponent fits need at least four grid points".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::Argument("grid points must be positive".into()));
    }
    if n_mc == 0 {
        return Err(Error::Argument("n_mc must be positive".into()));
    }
    Ok(())
}

fn fit_loglog(points: Vec<(f64, f64)>) -> ExponentFit {
    let mut warnings = Vec::new();
    let dropped: Vec<f64> = points.iter().filter(|p| p.1 <= 0.0).map(|p| p.0).collect();
    for t in &dropped {
        warnings.push(format!("no mass at t = {t}; grid point dropped"));
    }
    let used: Vec<(f64, f64)> = points.iter().filter(|p| p.1 > 0.0).map(|&(t, e)| (t.ln(), e.ln())).collect();
    let (slope, intercept) = if used.len() < 2 {
        warnings.push("fewer than two usable grid points; exponent reported as infinite".into());
        (f64::INFINITY, f64::NAN)
    } else {
        let n = used.len() as f64;
        let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
        let my = used.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        (slope, my - slope * mx)
    };
    for w in &warnings {
        log::warn!("{w}");
    }
    ExponentFit { slope, intercept, points, dropped, warnings }
}

/// Slope of `log P(|2 eta(X) - 1| <= t)` against `log t`.
pub fn estimate_margin_exponent(gen: &GeneratedData, t_grid: &[f64], n_mc: usize, seed: u64) -> Result<ExponentFit> {
    check_grid(t_grid, n_mc)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; gen.marginal.dim()];
    let mut counts = vec![0usize; t_grid.len()];
    for _ in 0..n_mc {
        gen.marginal.sample(&mut rng, &mut x);
        let m = (2.0 * gen.eta(&x)? - 1.0).abs();
        for (c, t) in counts.iter_mut().zip(t_grid) {
            if m <= *t {
                *c += 1;
            }
        }
    }
    let points = t_grid.iter().zip(&counts).map(|(&t, &c)| (t, c as f64 / n_mc as f64)).collect();
    Ok(fit_loglog(points))
}

/// Slope of `log E[|2 eta(X) - 1| I(tau(X) <= t)]` against `log t`, with
/// `tau` the distance to the Bayes boundary. Needs an affine Bayes rule.
pub fn estimate_noise_exponent(gen: &GeneratedData, t_grid: &[f64], n_mc: usize, seed: u64) -> Result<ExponentFit> {
    check_grid(t_grid, n_mc)?;
    if gen.bayes_rule.affine_form().is_none() {
        return Err(Error::Unsupported("noise exponent needs an affine Bayes boundary".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; gen.marginal.dim()];
    let mut sums = vec![0.0; t_grid.len()];
    for _ in 0..n_mc {
        gen.marginal.sample(&mut rng, &mut x);
        let m = (2.0 * gen.eta(&x)? - 1.0).abs();
        let tau = boundary_distance(&gen.bayes_rule, &x, None)?;
        for (s, t) in sums.iter_mut().zip(t_grid) {
            if tau <= *t {
                *s += m;
            }
        }
    }
    let points = t_grid.iter().zip(&sums).map(|(&t, &s)| (t, s / n_mc as f64)).collect();
    Ok(fit_loglog(points))
}
