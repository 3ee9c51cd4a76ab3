//! Seeded Monte Carlo sweeps over (dimension, shift, share) grids and the
//! treatment-rule analysis on CSV data.

use std::cmp::Ordering;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_itr_csv, Dataset};
use crate::erm::{weighted_zero_one_risk, ErmConfig};
use crate::error::{Error, Result};
use crate::itr::{ensure_propensities, fit_transfer_itr, make_weighting, value_row, write_value_report, ItrOptions, ValueRow};
use crate::pipeline::{fit_transfer_from_source, SvmHyper, TransferConfig};
use crate::rules::{DecisionRule, TransformFamily};
use crate::seed::derive_seed;
use crate::simgen::{generate, Boundary, Drift, Regression, Role, SimSetting};
use crate::svm::{train_weighted_svm, SvmConfig};

pub const RESULTS_HEADER: [&str; 11] =
    ["setting", "method", "dim", "shift", "share", "rep", "seed", "misclass", "theta_hat", "selection", "wall_ms"];

pub const PAPER_SCALE_REPS: usize = 320;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Pooled,
    SourceOnly,
    TargetOnly,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Proposed, Method::Pooled, Method::SourceOnly, Method::TargetOnly];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Pooled => "pooled",
            Method::SourceOnly => "source_only",
            Method::TargetOnly => "target_only",
        }
    }
}

/// The parts of a simulation setting that stay fixed across a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingTemplate {
    pub boundary: Boundary,
    pub drift: Drift,
    pub regression: Regression,
}

impl Default for SettingTemplate {
    fn default() -> Self {
        Self { boundary: Boundary::Linear { beta: None }, drift: Drift::Translation, regression: Regression::Logistic }
    }
}

impl SettingTemplate {
    pub fn instantiate(&self, d: usize, theta: f64, n: usize, role: Role, seed: u64) -> SimSetting {
        SimSetting {
            boundary: self.boundary.clone(),
            drift: self.drift.clone(),
            regression: self.regression,
            theta,
            d,
            n,
            role,
            seed,
        }
    }

    /// Transform family the proposed method calibrates. Linear boundaries are
    /// shifted along their normal so that `theta` is in score units; quadratic
    /// boundaries get a score offset; rotations act in the first coordinate plane.
    pub fn family(&self, d: usize, theta_box: Option<(f64, f64)>) -> Result<TransformFamily> {
        match (&self.drift, &self.boundary) {
            (Drift::Rotation, _) => {
                let (lo, hi) = theta_box.unwrap_or((-std::f64::consts::PI, std::f64::consts::PI));
                TransformFamily::coordinate_rotation(0, 1, lo, hi)
            }
            (_, Boundary::Linear { beta }) => {
                let (lo, hi) = theta_box.unwrap_or((-6.0, 6.0));
                let beta = beta.clone().unwrap_or_else(|| crate::simgen::default_beta(d));
                TransformFamily::normal_shift(&beta, lo, hi)
            }
            (_, Boundary::Quadratic) => {
                let (lo, hi) = theta_box.unwrap_or((-6.0, 6.0));
                TransformFamily::function_offset(lo, hi)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub dims: Vec<usize>,
    pub shifts: Vec<f64>,
    pub shares: Vec<f64>,
}

fn default_n_source() -> usize {
    2000
}

fn default_reps() -> usize {
    20
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default)]
    pub setting: SettingTemplate,
    pub grid: GridConfig,
    #[serde(default = "default_n_source")]
    pub n_source: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Box for the calibrated parameter; defaults depend on the drift.
    #[serde(default)]
    pub theta_box: Option<(f64, f64)>,
    /// Fill `wall_ms`. Off by default so that output is reproducible byte for byte.
    #[serde(default)]
    pub record_timing: bool,
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n_source == 0 {
            return Err(Error::Config("n_source must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.grid.dims.is_empty() || self.grid.shifts.is_empty() || self.grid.shares.is_empty() {
            return Err(Error::Config("every grid axis needs at least one value".into()));
        }
        if self.grid.shares.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Config("shares must be positive".into()));
        }
        if self.grid.dims.contains(&0) {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        Ok(())
    }

    /// `floor(n_source / share)`.
    pub fn n_target(&self, share: f64) -> usize {
        (self.n_source as f64 / share).floor() as usize
    }

    /// Grid cells `(dim, shift, share)` in sweep order.
    pub fn cells(&self) -> Vec<(usize, f64, f64)> {
        let mut out = Vec::new();
        for &d in &self.grid.dims {
            for &shift in &self.grid.shifts {
                for &share in &self.grid.shares {
                    out.push((d, shift, share));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    pub setting: String,
    pub method: Method,
    pub dim: usize,
    pub shift: f64,
    pub share: f64,
    pub rep: usize,
    pub seed: u64,
    /// `None` when the cell failed.
    pub misclass: Option<f64>,
    pub theta_hat: Option<Vec<f64>>,
    /// Winning candidate for the proposed method, `error: ...` for failed cells.
    pub selection: String,
    pub wall_ms: Option<f64>,
    /// Holdout risk of the selected rule and the minimum over candidates.
    pub holdout: Option<(f64, f64)>,
    pub cell: usize,
}

impl BenchmarkRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.setting.clone(),
            self.method.tag().to_string(),
            self.dim.to_string(),
            self.shift.to_string(),
            self.share.to_string(),
            self.rep.to_string(),
            self.seed.to_string(),
            self.misclass.map(|m| m.to_string()).unwrap_or_default(),
            self.theta_hat
                .as_ref()
                .map(|t| t.iter().map(f64::to_string).collect::<Vec<_>>().join(";"))
                .unwrap_or_default(),
            self.selection.clone(),
            self.wall_ms.map(|w| format!("{w:.3}")).unwrap_or_default(),
        ]
    }
}

pub fn write_rows<W: Write>(rows: &[BenchmarkRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

/// Seeds of one replicate: the row seed and the streams derived from it.
struct RepSeeds {
    rep: u64,
    source: u64,
    target: u64,
    validation: u64,
    split: u64,
    erm: u64,
}

impl RepSeeds {
    fn new(base: u64, cell: usize, rep: usize) -> Self {
        let s = derive_seed(base, &[cell as u64, rep as u64]);
        Self {
            rep: s,
            source: derive_seed(s, &[0]),
            target: derive_seed(s, &[1]),
            validation: derive_seed(s, &[2]),
            split: derive_seed(s, &[3]),
            erm: derive_seed(s, &[4]),
        }
    }
}

struct Outcome {
    misclass: f64,
    theta_hat: Option<Vec<f64>>,
    selection: String,
    holdout: Option<(f64, f64)>,
}

fn validation_error(rule: &DecisionRule, validation: &Dataset) -> Result<f64> {
    weighted_zero_one_risk(rule, validation)
}

fn run_rep(config: &BenchmarkConfig, cell: usize, (d, shift, share): (usize, f64, f64), rep: usize) -> Vec<BenchmarkRow> {
    let seeds = RepSeeds::new(config.base_seed, cell, rep);
    let n_target = config.n_target(share);
    let tag = config.setting.instantiate(d, shift, config.n_source, Role::Target, 0).tag();
    let row = |method: Method, outcome: std::result::Result<Outcome, String>, wall_ms: Option<f64>| match outcome {
        Ok(o) => BenchmarkRow {
            setting: tag.clone(),
            method,
            dim: d,
            shift,
            share,
            rep,
            seed: seeds.rep,
            misclass: Some(o.misclass),
            theta_hat: o.theta_hat,
            selection: o.selection,
            wall_ms,
            holdout: o.holdout,
            cell,
        },
        Err(e) => BenchmarkRow {
            setting: tag.clone(),
            method,
            dim: d,
            shift,
            share,
            rep,
            seed: seeds.rep,
            misclass: None,
            theta_hat: None,
            selection: format!("error: {e}"),
            wall_ms,
            holdout: None,
            cell,
        },
    };

    if n_target < 4 {
        let msg = format!("n_target = {n_target} is below 4");
        return config.methods.iter().map(|&m| row(m, Err(msg.clone()), None)).collect();
    }
    let data = (|| -> Result<_> {
        let source = generate(&config.setting.instantiate(d, shift, config.n_source, Role::Source, seeds.source))?.dataset;
        let target = generate(&config.setting.instantiate(d, shift, n_target, Role::Target, seeds.target))?.dataset;
        let validation = generate(&config.setting.instantiate(d, shift, n_target, Role::Target, seeds.validation))?.dataset;
        Ok((source, target, validation))
    })();
    let (source, target, validation) = match data {
        Ok(v) => v,
        Err(e) => return config.methods.iter().map(|&m| row(m, Err(e.to_string()), None)).collect(),
    };

    let mut source_model = None;
    let mut source_svm = || -> Result<Arc<crate::svm::SvmModel>> {
        if source_model.is_none() {
            let cfg = SvmConfig::practical(source.len(), d);
            source_model = Some(Arc::new(train_weighted_svm(&source, &cfg)?));
        }
        Ok(source_model.clone().expect("just set"))
    };

    let mut rows = Vec::with_capacity(config.methods.len());
    for &method in &config.methods {
        let start = Instant::now();
        let outcome = (|| -> Result<Outcome> {
            match method {
                Method::Proposed => {
                    let family = config.setting.family(d, config.theta_box)?;
                    let tc = TransferConfig {
                        source_svm: SvmHyper::Practical,
                        target_svm: SvmHyper::Practical,
                        family,
                        erm: ErmConfig::default().with_seed(seeds.erm),
                        split_seed: seeds.split,
                    };
                    let fit = fit_transfer_from_source(source_svm()?, &target, &tc)?;
                    let best = fit.holdout_risks.iter().copied().fold(f64::INFINITY, f64::min);
                    Ok(Outcome {
                        misclass: validation_error(&fit.rule_final, &validation)?,
                        theta_hat: Some(fit.theta_hat().to_vec()),
                        selection: fit.selection.tag().to_string(),
                        holdout: Some((fit.final_holdout_risk(), best)),
                    })
                }
                Method::SourceOnly => single(DecisionRule::from_svm(source_svm()?), &validation),
                Method::TargetOnly => {
                    let m = train_weighted_svm(&target, &SvmConfig::practical(target.len(), d))?;
                    single(DecisionRule::svm(m), &validation)
                }
                Method::Pooled => {
                    let pooled = source.concat(&target)?;
                    let m = train_weighted_svm(&pooled, &SvmConfig::practical(pooled.len(), d))?;
                    single(DecisionRule::svm(m), &validation)
                }
            }
        })();
        let wall = config.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3);
        rows.push(row(method, outcome.map_err(|e| e.to_string()), wall));
    }
    rows
}

fn single(rule: DecisionRule, validation: &Dataset) -> Result<Outcome> {
    Ok(Outcome { misclass: validation_error(&rule, validation)?, theta_hat: None, selection: String::new(), holdout: None })
}

/// Run every grid cell and replicate. Failures become tagged rows. Rows come
/// back in canonical order (cell, rep, method) whatever the scheduling.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<Vec<BenchmarkRow>> {
    config.validate()?;
    let tasks: Vec<(usize, (usize, f64, f64), usize)> = config
        .cells()
        .into_iter()
        .enumerate()
        .flat_map(|(i, cell)| (0..config.reps).map(move |rep| (i, cell, rep)))
        .collect();
    let mut rows: Vec<BenchmarkRow> = tasks.par_iter().flat_map_iter(|&(i, cell, rep)| run_rep(config, i, cell, rep)).collect();
    rows.sort_by(|a, b| (a.cell, a.rep, a.method).cmp(&(b.cell, b.rep, b.method)));
    if let Some(path) = &config.output {
        write_rows(&rows, std::fs::File::create(path)?)?;
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub setting: String,
    pub dim: usize,
    pub shift: f64,
    pub share: f64,
    pub method: Method,
    pub count: usize,
    pub failures: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl SummaryRow {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted values.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median and quartiles of the misclassification rate per (setting, dim,
/// shift, share, method), sorted by those keys.
pub fn summarize(rows: &[BenchmarkRow]) -> Vec<SummaryRow> {
    let key_order = |a: &BenchmarkRow, b: &BenchmarkRow| -> Ordering {
        a.setting
            .cmp(&b.setting)
            .then(a.dim.cmp(&b.dim))
            .then(a.shift.total_cmp(&b.shift))
            .then(a.share.total_cmp(&b.share))
            .then(a.method.cmp(&b.method))
    };
    let mut sorted: Vec<&BenchmarkRow> = rows.iter().collect();
    sorted.sort_by(|a, b| key_order(a, b));
    let mut out = Vec::new();
    for group in sorted.chunk_by(|a, b| key_order(a, b) == Ordering::Equal) {
        let mut rates: Vec<f64> = group.iter().filter_map(|r| r.misclass).collect();
        rates.sort_by(f64::total_cmp);
        let first = group[0];
        out.push(SummaryRow {
            setting: first.setting.clone(),
            dim: first.dim,
            shift: first.shift,
            share: first.share,
            method: first.method,
            count: rates.len(),
            failures: group.len() - rates.len(),
            median: quantile(&rates, 0.5),
            q1: quantile(&rates, 0.25),
            q3: quantile(&rates, 0.75),
        });
    }
    out
}

pub fn write_summary<W: Write>(summary: &[SummaryRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["setting", "dim", "shift", "share", "method", "count", "failures", "median", "q1", "q3", "iqr"])?;
    for s in summary {
        w.write_record([
            s.setting.clone(),
            s.dim.to_string(),
            s.shift.to_string(),
            s.share.to_string(),
            s.method.tag().to_string(),
            s.count.to_string(),
            s.failures.to_string(),
            s.median.to_string(),
            s.q1.to_string(),
            s.q3.to_string(),
            s.iqr().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItrAnalysisConfig {
    pub theta_box: (f64, f64),
    pub split_seed: u64,
    pub erm_seed: u64,
    pub options: ItrOptions,
    /// Replace every reward `r` by `ln(1 + r)` before fitting.
    pub log1p_outcome: bool,
    /// Ridge for fitted logistic propensities.
    pub ridge: f64,
}

impl Default for ItrAnalysisConfig {
    fn default() -> Self {
        Self {
            theta_box: (-5.0, 5.0),
            split_seed: 0,
            erm_seed: 0,
            options: ItrOptions::default(),
            log1p_outcome: false,
            ridge: 1e-8,
        }
    }
}

/// Fit proposed, source-only and target-only treatment rules and report each
/// rule's IPW value on the target sample.
pub fn run_itr_analysis(source_csv: impl AsRef<Path>, target_csv: impl AsRef<Path>, config: &ItrAnalysisConfig) -> Result<Vec<ValueRow>> {
    let load = |path: &Path| -> Result<_> {
        let mut data = load_itr_csv(path)?;
        if config.log1p_outcome {
            if let Some(i) = data.rewards().iter().position(|r| *r <= -1.0) {
                return Err(Error::Parse { row: i + 1, message: "log1p needs rewards above -1".into() });
            }
            data = data.map_rewards(f64::ln_1p)?;
        }
        let (data, model) = ensure_propensities(data, config.ridge)?;
        if let Some(m) = model {
            log::info!("{}: fitted propensity model {:?} (converged: {})", path.display(), m.coefficients, m.converged);
        }
        Ok(data)
    };
    let source = load(source_csv.as_ref())?;
    let target = load(target_csv.as_ref())?;
    let family = TransformFamily::function_offset(config.theta_box.0, config.theta_box.1)?;
    let mut tc = TransferConfig::new(family);
    tc.split_seed = config.split_seed;
    tc.erm.seed = config.erm_seed;
    let fit = fit_transfer_itr(&source, &target, &tc, &config.options)?;
    // Target-only uses the whole target sample, as in the classification sweep.
    let target_w = make_weighting(&target)?.to_dataset(target.features())?;
    let target_only = DecisionRule::svm(train_weighted_svm(&target_w, &SvmConfig::practical(target.len(), target.dim()))?);
    Ok(vec![
        value_row("proposed", &fit.rule_final, &target)?,
        value_row("source_only", &fit.rule_source, &target)?,
        value_row("target_only", &target_only, &target)?,
    ])
}

pub fn write_itr_report<W: Write>(rows: &[ValueRow], out: W) -> Result<()> {
    write_value_report(rows, out)
}
