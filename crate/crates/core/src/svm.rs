//! Weighted hinge-loss kernel SVM without offset, Gaussian RBF kernel.
//!
//! The estimator minimizes
//!
//! ```text
//! lambda * ||f||_H^2 + (1/n) * sum_i w_i * (1 - y_i f(x_i))_+
//! ```
//!
//! over the RKHS of `k(x, x') = exp(-sigma^2 ||x - x'||^2)`. With no intercept
//! the dual has box constraints only,
//!
//! ```text
//! max_a  sum_i a_i - 1/2 a' Q a,   0 <= a_i <= w_i / (2 lambda n),   Q_ij = y_i y_j k(x_i, x_j)
//! ```
//!
//! and is solved by greedy exact coordinate ascent. The fitted decision function is
//! `f(x) = sum_i a_i y_i k(x_i, x)`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};


use crate::dataset::{Dataset, Features};
use crate::error::{Error, Result};

/// Largest training set for which the full Gram matrix is cached.
pub const GRAM_CACHE_LIMIT: usize = 4000;

/// `exp(-sigma^2 * ||x - x'||^2)`. Note the `sigma^2` multiplier.
pub fn rbf_kernel(x: &[f64], x_prime: &[f64], sigma: f64) -> f64 {
    (-sigma * sigma * squared_distance(x, x_prime)).exp()
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmConfig {
    pub lambda: f64,
    pub sigma: f64,
    /// Stopping threshold on the largest projected-gradient (KKT) violation.
    pub tolerance: f64,
    /// Maximum number of passes over the coordinates.
    pub max_iterations: usize,
}

impl SvmConfig {
    pub fn new(lambda: f64, sigma: f64) -> Result<Self> {
        let cfg = Self { lambda, sigma, tolerance: 1e-6, max_iterations: 100_000 };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Library-style defaults: `sigma^2 = 1/d` and `lambda = 1/(2n)` (cost 1).
    pub fn practical(n: usize, d: usize) -> Self {
        Self {
            lambda: 1.0 / (2.0 * n.max(1) as f64),
            sigma: (d.max(1) as f64).powf(-0.5),
            tolerance: 1e-6,
            max_iterations: 100_000,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.lambda) || !positive(self.sigma) || !positive(self.tolerance) {
            return Err(Error::Argument(format!(
                "lambda, sigma and tolerance must be positive (got {}, {}, {})",
                self.lambda, self.sigma, self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDiagnostics {
    /// Completed passes of n coordinate steps.
    pub iterations: usize,
    /// Individual coordinate updates that changed a dual variable.
    pub updates: usize,
    pub max_kkt_violation: f64,
    /// Primal objective `lambda ||f||^2 + (1/n) sum w_i hinge_i` at the solution.
    pub objective: f64,
    /// Dual objective in the same scale; `objective - dual_objective` is the duality gap.
    pub dual_objective: f64,
    /// Dual objective after every pass, accumulated from the exact per-step gains; non-decreasing.
    pub dual_trace: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    support_points: Features,
    dual_coefficients: Vec<f64>,
    /// Training row of each support point.
    support_indices: Vec<usize>,
    sigma: f64,
    lambda: f64,
    pub diagnostics: TrainingDiagnostics,
}

impl SvmModel {
    /// Assemble a model directly from a kernel expansion.
    pub fn from_parts(support_points: Features, dual_coefficients: Vec<f64>, sigma: f64, lambda: f64) -> Result<Self> {
        if support_points.as_slice().is_empty() {
            // An empty expansion still needs a dimension; callers use `empty`.
            return Err(Error::InvalidData("use SvmModel::empty for an empty expansion".into()));
        }
        if support_points.n_rows() != dual_coefficients.len() {
            return Err(Error::InvalidData("one coefficient per support point required".into()));
        }
        let m = dual_coefficients.len();
        Ok(Self {
            support_points,
            dual_coefficients,
            support_indices: (0..m).collect(),
            sigma,
            lambda,
            diagnostics: TrainingDiagnostics::empty(),
        })
    }

    /// The zero function on `R^dim`.
    pub fn empty(dim: usize, sigma: f64, lambda: f64) -> Self {
        Self {
            support_points: Features::new(Vec::new(), dim.max(1)).expect("empty features"),
            dual_coefficients: Vec::new(),
            support_indices: Vec::new(),
            sigma,
            lambda,
            diagnostics: TrainingDiagnostics::empty(),
        }
    }

    pub fn dim(&self) -> usize {
        self.support_points.dim()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_support(&self) -> usize {
        self.dual_coefficients.len()
    }

    pub fn support_points(&self) -> &Features {
        &self.support_points
    }

    /// Signed coefficients `a_i * y_i`.
    pub fn dual_coefficients(&self) -> &[f64] {
        &self.dual_coefficients
    }

    pub fn support_indices(&self) -> &[usize] {
        &self.support_indices
    }

    pub fn decision_value(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::Shape { expected: self.dim(), found: x.len() });
        }
        Ok(self.decision_value_unchecked(x))
    }

    pub(crate) fn decision_value_unchecked(&self, x: &[f64]) -> f64 {
        let s2 = self.sigma * self.sigma;
        self.support_points
            .rows()
            .zip(&self.dual_coefficients)
            .map(|(s, c)| c * (-s2 * squared_distance(s, x)).exp())
            .sum()
    }

    /// `+1` iff the decision value is `>= 0`.
    pub fn predict(&self, x: &[f64]) -> Result<i8> {
        Ok(sign_label(self.decision_value(x)?))
    }

    /// Text dump: one `#` header line with hyperparameters and diagnostics,
    /// a column header `coef,s1..sd`, then one row per support point.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let d = &self.diagnostics;
        writeln!(
            out,
            "# svm sigma={} lambda={} iterations={} kkt={} objective={} converged={}",
            self.sigma, self.lambda, d.iterations, d.max_kkt_violation, d.objective, d.converged
        )?;
        let mut header = String::from("coef");
        for j in 1..=self.dim() {
            write!(header, ",s{j}").expect("string write");
        }
        writeln!(out, "{header}")?;
        for (row, c) in self.support_points.rows().zip(&self.dual_coefficients) {
            let mut line = c.to_string();
            for v in row {
                write!(line, ",{v}").expect("string write");
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Inverse of [`SvmModel::write_text`]; diagnostics other than the header
    /// fields are not restored.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines.next().ok_or_else(|| Error::Schema("empty model file".into()))??;
        let field = |name: &str| -> Result<f64> {
            header
                .split_whitespace()
                .find_map(|tok| tok.strip_prefix(&format!("{name}=")))
                .ok_or_else(|| Error::Schema(format!("model header lacks {name}")))?
                .parse()
                .map_err(|_| Error::Schema(format!("bad {name} in model header")))
        };
        let sigma = field("sigma")?;
        let lambda = field("lambda")?;
        let columns = lines.next().ok_or_else(|| Error::Schema("missing column header".into()))??;
        let dim = columns.split(',').count().saturating_sub(1);
        if dim == 0 {
            return Err(Error::Schema("model has no feature columns".into()));
        }
        let mut coefs = Vec::new();
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse { row: i + 1, message: "bad model row".into() })?;
            if vals.len() != dim + 1 {
                return Err(Error::Parse { row: i + 1, message: "wrong number of columns".into() });
            }
            coefs.push(vals[0]);
            points.extend_from_slice(&vals[1..]);
        }
        if coefs.is_empty() {
            return Ok(Self::empty(dim, sigma, lambda));
        }
        Self::from_parts(Features::new(points, dim)?, coefs, sigma, lambda)
    }
}

impl TrainingDiagnostics {
    fn empty() -> Self {
        Self {
            iterations: 0,
            updates: 0,
            max_kkt_violation: 0.0,
            objective: 0.0,
            dual_objective: 0.0,
            dual_trace: Vec::new(),
            converged: true,
        }
    }
}

#[inline]
pub(crate) fn sign_label(value: f64) -> i8 {
    if value >= 0.0 {
        1
    } else {
        -1
    }
}

/// Kernel rows: a full Gram matrix for small problems, otherwise rows are
/// computed on first use and kept while they fit in `ROW_CACHE_BYTES`.
enum KernelRows<'a> {
    Cached { gram: Vec<f64>, n: usize },
    Lazy { features: &'a Features, s2: f64, rows: Vec<Option<Box<[f64]>>>, room: usize, buf: Vec<f64> },
}

const ROW_CACHE_BYTES: usize = 1 << 30;

impl<'a> KernelRows<'a> {
    fn new(features: &'a Features, sigma: f64) -> Self {
        let n = features.n_rows();
        let s2 = sigma * sigma;
        if n <= GRAM_CACHE_LIMIT {
            let mut gram = vec![0.0; n * n];
            for i in 0..n {
                gram[i * n + i] = 1.0;
                let xi = features.row(i);
                for j in 0..i {
                    let k = (-s2 * squared_distance(xi, features.row(j))).exp();
                    gram[i * n + j] = k;
                    gram[j * n + i] = k;
                }
            }
            KernelRows::Cached { gram, n }
        } else {
            let room = ROW_CACHE_BYTES / (n * std::mem::size_of::<f64>());
            KernelRows::Lazy { features, s2, rows: vec![None; n], room, buf: vec![0.0; n] }
        }
    }

    fn row(&mut self, i: usize) -> &[f64] {
        match self {
            KernelRows::Cached { gram, n } => &gram[i * *n..(i + 1) * *n],
            KernelRows::Lazy { features, s2, rows, room, buf } => {
                let fill = |out: &mut [f64]| {
                    let xi = features.row(i);
                    for (j, slot) in out.iter_mut().enumerate() {
                        *slot = (-*s2 * squared_distance(xi, features.row(j))).exp();
                    }
                };
                if rows[i].is_none() {
                    if *room == 0 {
                        fill(buf);
                        return buf;
                    }
                    let mut row = vec![0.0; buf.len()].into_boxed_slice();
                    fill(&mut row);
                    rows[i] = Some(row);
                    *room -= 1;
                }
                rows[i].as_deref().expect("row cached above")
            }
        }
    }
}

struct DualState {
    alpha: Vec<f64>,
    /// Gradient of the dual objective, `1 - y_i f(x_i)`.
    grad: Vec<f64>,
    upper: Vec<f64>,
}

impl DualState {
    fn violation(&self, i: usize) -> f64 {
        let (a, g, c) = (self.alpha[i], self.grad[i], self.upper[i]);
        if c <= 0.0 {
            0.0
        } else if a <= 0.0 {
            g.max(0.0)
        } else if a >= c {
            (-g).max(0.0)
        } else {
            g.abs()
        }
    }

    fn max_violation(&self) -> f64 {
        (0..self.alpha.len()).map(|i| self.violation(i)).fold(0.0, f64::max)
    }

    /// Dual and primal objectives, both scaled by `2 lambda`.
    fn objectives(&self, lambda: f64) -> (f64, f64) {
        let mut quad = 0.0; // a'Qa = sum a_i (1 - g_i)
        let mut lin = 0.0;
        let mut hinge = 0.0;
        for i in 0..self.alpha.len() {
            quad += self.alpha[i] * (1.0 - self.grad[i]);
            lin += self.alpha[i];
            hinge += self.upper[i] * self.grad[i].max(0.0);
        }
        let dual = 2.0 * lambda * (lin - 0.5 * quad);
        let primal = 2.0 * lambda * (0.5 * quad + hinge);
        (dual, primal)
    }

    fn recompute_gradient(&mut self, kernel: &mut KernelRows<'_>, labels: &[i8]) {
        let n = self.alpha.len();
        let mut f = vec![0.0; n];
        for i in 0..n {
            if self.alpha[i] > 0.0 {
                let coef = self.alpha[i] * f64::from(labels[i]);
                for (fj, kij) in f.iter_mut().zip(kernel.row(i)) {
                    *fj += coef * kij;
                }
            }
        }
        for j in 0..n {
            self.grad[j] = 1.0 - f64::from(labels[j]) * f[j];
        }
    }
}

/// Fit the weighted no-offset SVM. Weights, when present, multiply the hinge
/// terms and enter the dual as per-sample bounds `w_i / (2 lambda n)`.
pub fn train_weighted_svm(data: &Dataset, config: &SvmConfig) -> Result<SvmModel> {
    config.validate()?;
    let n = data.len();
    if data.total_weight() <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    let labels = data.labels();
    let denom = 2.0 * config.lambda * n as f64;
    let upper: Vec<f64> = (0..n).map(|i| data.weight(i) / denom).collect();
    let mut state = DualState { alpha: vec![0.0; n], grad: vec![1.0; n], upper };
    let mut kernel = KernelRows::new(data.features(), config.sigma);

    let signs: Vec<f64> = labels.iter().map(|&y| f64::from(y)).collect();
    let mut active: Vec<usize> = Vec::with_capacity(n);
    let mut dual_trace = Vec::new();
    let mut dual = 0.0;
    let mut iterations = 0;
    let mut updates = 0;
    let mut steps = 0;
    let mut converged = false;

    // Greedy coordinate ascent: each step takes the coordinate with the largest
    // exact dual gain. The candidate set is refreshed once per pass of n steps
    // and holds violators plus free variables; a full check precedes stopping.
    while iterations < config.max_iterations {
        if steps == 0 {
            active.clear();
            active.extend((0..n).filter(|&i| state.violation(i) > 0.0 || (state.alpha[i] > 0.0 && state.alpha[i] < state.upper[i])));
        }
        let mut best = (0.0, usize::MAX, 0.0);
        let mut worst = 0.0f64;
        for &i in &active {
            let v = state.violation(i);
            if v > 0.0 {
                worst = worst.max(v);
                // Q_ii = k(x_i, x_i) = 1 for the RBF kernel.
                let delta = (state.alpha[i] + state.grad[i]).clamp(0.0, state.upper[i]) - state.alpha[i];
                let gain = delta * state.grad[i] - 0.5 * delta * delta;
                if gain > best.0 {
                    best = (gain, i, delta);
                }
            }
        }
        if worst <= config.tolerance || best.1 == usize::MAX {
            if steps != 0 {
                steps = 0;
                continue;
            }
            // Guard against drift in the incrementally maintained gradient.
            state.recompute_gradient(&mut kernel, labels);
            if state.max_violation() <= config.tolerance {
                converged = true;
                break;
            }
            iterations += 1;
            dual_trace.push(dual);
            continue;
        }
        let (gain, i, delta) = best;
        state.alpha[i] += delta;
        dual += 2.0 * config.lambda * gain;
        updates += 1;
        let step = delta * signs[i];
        for ((g, kij), yj) in state.grad.iter_mut().zip(kernel.row(i)).zip(&signs) {
            *g -= step * yj * kij;
        }
        steps += 1;
        if steps == n {
            steps = 0;
            iterations += 1;
            dual_trace.push(dual);
        }
    }
    if dual_trace.last() != Some(&dual) {
        dual_trace.push(dual);
    }
    if !converged {
        state.recompute_gradient(&mut kernel, labels);
    }

    let (dual_objective, objective) = state.objectives(config.lambda);
    let max_kkt_violation = state.max_violation();
    let support_indices: Vec<usize> = (0..n).filter(|&i| state.alpha[i] > 0.0).collect();
    let mut points = Vec::with_capacity(support_indices.len() * data.dim());
    for &i in &support_indices {
        points.extend_from_slice(data.row(i));
    }
    let dual_coefficients = support_indices
        .iter()
        .map(|&i| state.alpha[i] * f64::from(labels[i]))
        .collect();
    Ok(SvmModel {
        support_points: Features::new(points, data.dim())?,
        dual_coefficients,
        support_indices,
        sigma: config.sigma,
        lambda: config.lambda,
        diagnostics: TrainingDiagnostics {
            iterations,
            updates,
            max_kkt_violation,
            objective,
            dual_objective,
            dual_trace,
            converged,
        },
    })
}
