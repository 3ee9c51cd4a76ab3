//! Transfer learning for classification and individualized treatment rules
//! under decision-rule drift.
//!
//! The source domain's kernel SVM rule is moved by a low-dimensional
//! parametric transform fitted on scarce target data, then compared against
//! a target-only SVM and the raw source rule on a held-out target half.

pub mod bench;
pub mod dataset;
pub mod erm;
pub mod error;
pub mod geometry;
pub mod itr;
pub mod pipeline;
pub mod rules;
pub mod seed;
pub mod simgen;
pub mod svm;

pub use bench::{run_benchmark, run_itr_analysis, summarize, BenchmarkConfig, BenchmarkRow, ItrAnalysisConfig, Method, SummaryRow};
pub use dataset::{CsvSchema, Dataset, Features, ItrDataset, SplitPair};
pub use erm::{calibrate, nelder_mead, weighted_zero_one_risk, CalibrationResult, ErmConfig, NelderMeadConfig, NelderMeadResult, StartRecord};
pub use error::{Error, Result};
pub use geometry::{boundary_distance, empirical_symmetric_difference, hausdorff_estimate, DomainBox, GridSpec, McEstimate};
pub use itr::{estimate_value, fit_logistic_propensity, fit_transfer_itr, itr_weight, make_weighting, ItrOptions, ItrWeighting, PropensityModel, ValueRow};
pub use pipeline::{aggregate, fit_transfer_classifier, fit_transfer_from_source, rate_beta, schedule_lambda_sigma, Candidate, SvmHyper, TransferConfig, TransferFit};
pub use rules::{BaseRule, DecisionRule, ParamBox, Transform, TransformFamily, TransformKind};
pub use seed::derive_seed;
pub use simgen::{estimate_margin_exponent, estimate_noise_exponent, example1_sampler, generate, Boundary, Drift, ExponentFit, GeneratedData, Regression, Role, SimSetting};
pub use svm::{SvmConfig, SvmModel, TrainingDiagnostics};
