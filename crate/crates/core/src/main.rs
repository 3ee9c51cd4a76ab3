use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ruledrift::bench::{write_itr_report, write_rows, write_summary, PAPER_SCALE_REPS};
use ruledrift::dataset::load_classification_csv;
use ruledrift::simgen::DEFAULT_T_GRID;
use ruledrift::{
    estimate_margin_exponent, estimate_noise_exponent, example1_sampler, fit_transfer_classifier, generate,
    run_benchmark, run_itr_analysis, summarize, BenchmarkConfig, CsvSchema, Error, ItrAnalysisConfig, Result,
    SimSetting, TransferConfig, TransformFamily,
};

#[derive(Parser)]
#[command(name = "ruledrift", version, about = "Transfer of decision rules under structured drift")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Offset,
    Translation,
    Rotation,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark sweep described by a TOML file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `base_seed`.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        reps: Option<usize>,
        /// Use 320 replicates per cell.
        #[arg(long, conflicts_with = "reps")]
        paper_scale: bool,
        /// Results CSV; overrides `output`, stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Median/IQR summary CSV.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Fill the wall_ms column.
        #[arg(long)]
        timing: bool,
    },
    /// Draw one sample for a simulation setting given as TOML.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the transfer classifier on source and target CSV files.
    Fit {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum, default_value = "offset")]
        family: FamilyArg,
        /// Comma separated direction for `translation`.
        #[arg(long, value_delimiter = ',')]
        direction: Vec<f64>,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        theta_lo: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        theta_hi: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV of optimizer starts.
        #[arg(long)]
        starts: Option<PathBuf>,
    },
    /// Individualized treatment rule transfer on source and target CSV files.
    Itr {
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        log1p_outcome: bool,
        #[arg(long, default_value_t = 0.01)]
        c0: f64,
        #[arg(long)]
        reward_bound: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Margin and noise exponent estimates on the unit-ball example.
    Diagnose {
        /// Exponent of the regression function near the boundary.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 100_000)]
        n_mc: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Prefix for `<prefix>_margin.csv` and `<prefix>_noise.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, seed, reps, paper_scale, out, summary, timing } => {
            let mut cfg = BenchmarkConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.base_seed = s;
            }
            if let Some(r) = reps {
                cfg.reps = r;
            }
            if paper_scale {
                cfg.reps = PAPER_SCALE_REPS;
            }
            cfg.record_timing |= timing;
            let out = out.or(cfg.output.take());
            let rows = run_benchmark(&cfg)?;
            let failed = rows.iter().filter(|r| r.misclass.is_none()).count();
            if failed > 0 {
                log::warn!("{failed} of {} rows failed", rows.len());
            }
            write_rows(&rows, sink(out.as_deref())?)?;
            if let Some(p) = summary {
                write_summary(&summarize(&rows), File::create(p)?)?;
            }
        }
        Command::Generate { config, seed, out } => {
            let text = std::fs::read_to_string(&config)?;
            let mut setting: SimSetting = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            if let Some(s) = seed {
                setting.seed = s;
            }
            generate(&setting)?.write_csv(sink(out.as_deref())?)?;
        }
        Command::Fit { source, target, family, direction, theta_lo, theta_hi, seed, out, starts } => {
            let schema = CsvSchema::default();
            let source = load_classification_csv(&source, &schema)?;
            let target = load_classification_csv(&target, &schema)?;
            let family = match family {
                FamilyArg::Offset => TransformFamily::function_offset(theta_lo, theta_hi)?,
                FamilyArg::Translation => {
                    if direction.is_empty() {
                        return Err(Error::Argument("translation needs --direction".into()));
                    }
                    TransformFamily::spatial_translation(direction, theta_lo, theta_hi)?
                }
                FamilyArg::Rotation => TransformFamily::coordinate_rotation(0, 1, theta_lo, theta_hi)?,
            };
            let cfg = TransferConfig::new(family).with_seeds(seed, ruledrift::derive_seed(seed, &[1]));
            let fit = fit_transfer_classifier(&source, &target, &cfg)?;
            fit.write_summary_csv(sink(out.as_deref())?)?;
            if let Some(p) = starts {
                fit.calibration.write_starts_csv(File::create(p)?)?;
            }
        }
        Command::Itr { source, target, log1p_outcome, c0, reward_bound, seed, out } => {
            let mut cfg = ItrAnalysisConfig { split_seed: seed, erm_seed: ruledrift::derive_seed(seed, &[1]), log1p_outcome, ..Default::default() };
            cfg.options.c0 = c0;
            cfg.options.reward_bound = reward_bound;
            let rows = run_itr_analysis(&source, &target, &cfg)?;
            write_itr_report(&rows, sink(out.as_deref())?)?;
        }
        Command::Diagnose { t, dim, n_mc, seed, out } => {
            let gen = example1_sampler(t, dim, 1, seed)?;
            let margin = estimate_margin_exponent(&gen, &DEFAULT_T_GRID, n_mc, ruledrift::derive_seed(seed, &[1]))?;
            let noise = estimate_noise_exponent(&gen, &DEFAULT_T_GRID, n_mc, ruledrift::derive_seed(seed, &[2]))?;
            for w in margin.warnings.iter().chain(&noise.warnings) {
                log::warn!("{w}");
            }
            println!("margin_exponent,{}", margin.slope);
            println!("noise_exponent,{}", noise.slope);
            if let Some(prefix) = out {
                let with = |suffix: &str| {
                    let mut name = prefix.file_name().map(|s| s.to_os_string()).unwrap_or_default();
                    name.push(suffix);
                    prefix.with_file_name(name)
                };
                margin.write_csv(File::create(with("_margin.csv"))?)?;
                noise.write_csv(File::create(with("_noise.csv"))?)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
