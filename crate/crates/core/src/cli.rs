//! Command-line front end: `estimate`, `simulate` and `sweep`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{AteEstimate, Estimator};
use crate::nuisance::{OutcomeModel, PropensityModel};
use crate::selectors::{ctmle_select, cv_select_gamma, mv_select_gamma, SelectorConfig};
use crate::simulation::{
    monte_carlo_true_ses, run_replications, run_sweep, sample_dataset, true_se_seed, write_sweep_csv, DgpConfig,
    Method, StudyConfig,
};
use crate::truncation::{make_grid, truncate_upper, TruncationGrid};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "ctmle",
    version,
    about = "ATE estimation with adaptive propensity-score truncation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the ATE on a CSV dataset with header y,a,w1,...,wp.
    Estimate(EstimateArgs),
    /// Monte Carlo study of the data-adaptive methods.
    Simulate(SimulateArgs),
    /// Bias/SE/MSE of fixed-γ estimators along the truncation grid.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads. Output does not depend on this.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Output file (estimate, sweep) or directory (simulate); stdout if
    /// omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = 0.6)]
    pub gamma_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_max: f64,
    #[arg(long, default_value_t = 0.01)]
    pub gamma_step: f64,
    /// Explicit comma-separated grid, e.g. `0.8,0.9,1.0`. Overrides the
    /// range flags.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
}

impl GridArgs {
    pub fn build(&self) -> Result<TruncationGrid> {
        match &self.grid {
            Some(values) => TruncationGrid::from_values(values.clone()),
            None => make_grid(self.gamma_min, self.gamma_max, self.gamma_step),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SelectorArgs {
    /// Cross-validation folds.
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Half-sample splits of the MV selector.
    #[arg(long, default_value_t = 10)]
    pub k_repeats: usize,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

impl SelectorArgs {
    fn config(&self, seed: u64) -> Result<SelectorConfig> {
        if self.folds < 2 {
            return Err(Error::Domain(format!("need at least 2 folds, got {}", self.folds)));
        }
        if self.k_repeats == 0 {
            return Err(Error::Domain("k-repeats must be positive".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Domain(format!("level must lie in (0, 1), got {}", self.level)));
        }
        Ok(SelectorConfig {
            folds: self.folds,
            k_repeats: self.k_repeats,
            seed,
            level: self.level,
            ..SelectorConfig::default()
        })
    }
}

/// How the truncation level is chosen in `estimate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectorChoice {
    Fixed(f64),
    Cv,
    Mv,
    Ctmle,
}

impl FromStr for SelectorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "cv" => Ok(Self::Cv),
            "mv" => Ok(Self::Mv),
            "ctmle" | "c-tmle" => Ok(Self::Ctmle),
            _ => {
                let gamma = lower
                    .strip_prefix("fixed:")
                    .and_then(|g| g.parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::Domain(format!(
                            "unknown selector `{s}` (expected fixed:<gamma>, cv, mv or ctmle)"
                        ))
                    })?;
                if !(gamma > 0.0 && gamma <= 1.0) {
                    return Err(Error::Domain(format!(
                        "truncation level must lie in (0, 1], got {gamma}"
                    )));
                }
                Ok(Self::Fixed(gamma))
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "tmle")]
    pub estimator: Estimator,
    /// fixed:<gamma>, cv, mv or ctmle.
    #[arg(long, default_value = "ctmle")]
    pub selector: SelectorChoice,
    /// Use this constant propensity score instead of fitting one.
    #[arg(long)]
    pub known_ps: Option<f64>,
    /// Covariates of the outcome regression, by name (`w3`) or 1-based
    /// index; all covariates if omitted.
    #[arg(long, value_delimiter = ',')]
    pub outcome_columns: Option<Vec<String>>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub selection: SelectorArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DgpArgs {
    /// Positivity parameter; larger values push the PS toward 1.
    #[arg(long = "C", default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Replications.
    #[arg(long = "R", default_value_t = 200)]
    pub r: usize,
    /// Exchangeable correlation of the covariates.
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    /// First covariate (3 or 2) of the weighted block in the PS model.
    #[arg(long, default_value_t = 3)]
    pub sum_from: usize,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub treatment_effect: f64,
}

impl DgpArgs {
    fn config(&self, seed: u64) -> Result<DgpConfig> {
        let config = DgpConfig {
            positivity: self.c,
            n: self.n,
            rho: self.rho,
            seed,
            sum_from: self.sum_from,
            treatment_effect: self.treatment_effect,
            ..DgpConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    /// Comma-separated methods: c-tmle, mv-tmle, cv-<estimator>,
    /// <estimator>@<gamma>.
    #[arg(long, value_delimiter = ',', default_value = "cv-tmle,mv-tmle,c-tmle")]
    pub methods: Vec<Method>,
    /// Replications of a separate Monte Carlo run giving the true SE; adds
    /// starred coverage rows.
    #[arg(long)]
    pub true_se: Option<usize>,
    /// Include per-replication estimates in report.json.
    #[arg(long)]
    pub keep_replicates: bool,
    /// Write every simulated dataset as CSV into this directory.
    #[arg(long)]
    pub dump_data: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub selection: SelectorArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub dgp: DgpArgs,
    #[arg(long, value_delimiter = ',', default_value = "ipw,hajek,aipw,tmle")]
    pub estimators: Vec<Estimator>,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// JSON form of an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema_version: u32,
    pub method: String,
    pub psi: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub gamma: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl From<AteEstimate> for EstimateReport {
    fn from(e: AteEstimate) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            method: e.method,
            psi: e.psi,
            se: e.se,
            ci_lower: e.ci_lower,
            ci_upper: e.ci_upper,
            gamma: e.gamma,
            diagnostics: e.diagnostics,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Sweep(args) => cmd_sweep(&args),
    }
}

fn parse_outcome_columns(names: &[String], p: usize) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|name| {
            let trimmed = name.trim();
            let digits = trimmed
                .strip_prefix('w')
                .or_else(|| trimmed.strip_prefix('W'))
                .unwrap_or(trimmed);
            match digits.parse::<usize>() {
                Ok(j) if (1..=p).contains(&j) => Ok(j - 1),
                _ => Err(Error::Domain(format!("outcome column `{name}` is not one of w1..w{p}"))),
            }
        })
        .collect()
}

/// Run the `estimate` pipeline on an in-memory dataset.
pub fn estimate_dataset(data: &Dataset, args: &EstimateArgs) -> Result<AteEstimate> {
    let grid = args.grid.build()?;
    let config = args.selection.config(args.common.seed)?;
    let outcome = match &args.outcome_columns {
        Some(names) => OutcomeModel::with_covariates(parse_outcome_columns(names, data.n_covariates())?),
        None => OutcomeModel::all_covariates(),
    };
    let q0 = outcome.fit_initial(data)?;
    let ps = match args.known_ps {
        Some(p) => {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Domain(format!(
                    "known propensity score must lie in (0, 1), got {p}"
                )));
            }
            if !matches!(args.selector, SelectorChoice::Fixed(_)) {
                return Err(Error::Domain("--known-ps requires a fixed:<gamma> selector".into()));
            }
            vec![p; data.len()]
        }
        None => PropensityModel::default().fit(data)?.ps,
    };
    let needs_tmle = |name: &str| {
        if args.estimator == Estimator::Tmle {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "the {name} selector only supports the tmle estimator"
            )))
        }
    };
    let gamma = match args.selector {
        SelectorChoice::Fixed(g) => g,
        SelectorChoice::Cv => cv_select_gamma(data, &grid, &config)?.gamma,
        SelectorChoice::Mv => {
            needs_tmle("mv")?;
            mv_select_gamma(data, &ps, &q0, &grid, &config)?.gamma
        }
        SelectorChoice::Ctmle => {
            needs_tmle("ctmle")?;
            return Ok(ctmle_select(&q0, data, &ps, &grid, &config)?.estimate);
        }
    };
    let truncated = truncate_upper(&ps, gamma)?;
    Ok(args
        .estimator
        .estimate(data, &truncated, &q0, config.level)?
        .with_gamma(Some(gamma)))
}

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize>(value: &T, mut out: impl Write, path: Option<&Path>) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| io_error(path, e))
}

fn io_error(path: Option<&Path>, e: io::Error) -> Error {
    Error::io(path.unwrap_or(Path::new("<stdout>")), e)
}

fn cmd_estimate(args: &EstimateArgs) -> Result<()> {
    let data = Dataset::read_csv(&args.input)?;
    let estimate = estimate_dataset(&data, args)?;
    let path = args.common.out.as_deref();
    let out = open_output(path)?;
    match args.common.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&EstimateReport::from(estimate), out, path),
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(out);
            wtr.write_record(["method", "psi", "se", "ci_lower", "ci_upper", "gamma"])?;
            wtr.write_record([
                estimate.method.clone(),
                estimate.psi.to_string(),
                estimate.se.to_string(),
                estimate.ci_lower.to_string(),
                estimate.ci_upper.to_string(),
                estimate.gamma.map(|g| g.to_string()).unwrap_or_default(),
            ])?;
            wtr.flush().map_err(|e| io_error(path, e))
        }
    }
}

fn study_config(dgp: DgpConfig, grid: TruncationGrid, selector: SelectorConfig, jobs: usize) -> Result<StudyConfig> {
    if jobs == 0 {
        return Err(Error::Domain("jobs must be positive".into()));
    }
    Ok(StudyConfig {
        selector,
        ..StudyConfig::new(dgp).with_grid(grid).with_jobs(jobs)
    })
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let seed = args.common.seed;
    let dgp = args.dgp.config(seed)?;
    let study = study_config(dgp, args.grid.build()?, args.selection.config(seed)?, args.common.jobs)?;

    if let Some(dir) = &args.dump_data {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for r in 0..args.dgp.r {
            let data = sample_dataset(&dgp, r as u64)?;
            data.write_csv(&dir.join(format!("replication_{r:04}.csv")))?;
        }
    }

    let mut report = run_replications(&study, &args.methods, args.dgp.r)?;
    if let Some(r_large) = args.true_se {
        let true_study = StudyConfig {
            dgp: DgpConfig {
                seed: true_se_seed(seed),
                ..dgp
            },
            ..study.clone()
        };
        let ses = monte_carlo_true_ses(&true_study, &args.methods, r_large)?;
        let pairs: Vec<(String, f64)> = args.methods.iter().map(Method::label).zip(ses).collect();
        report.attach_true_se(&pairs, study.selector.level)?;
    }
    if !args.keep_replicates {
        report = report.without_replicates();
    }

    match &args.common.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            let csv_path = dir.join("report.csv");
            report.write_methods_csv(File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?)?;
            let json_path = dir.join("report.json");
            let file = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
            write_json(&report, BufWriter::new(file), Some(&json_path))?;
            if !report.coverage.is_empty() {
                let cov_path = dir.join("coverage.csv");
                report.write_coverage_csv(File::create(&cov_path).map_err(|e| Error::io(&cov_path, e))?)?;
            }
            Ok(())
        }
        None => match args.common.format.unwrap_or(Format::Csv) {
            Format::Csv => {
                report.write_methods_csv(io::stdout().lock())?;
                if !report.coverage.is_empty() {
                    println!();
                    report.write_coverage_csv(io::stdout().lock())?;
                }
                Ok(())
            }
            Format::Json => write_json(&report, io::stdout().lock(), None),
        },
    }
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let seed = args.common.seed;
    let dgp = args.dgp.config(seed)?;
    let study = study_config(
        dgp,
        args.grid.build()?,
        SelectorConfig::default().with_seed(seed),
        args.common.jobs,
    )?;
    let rows = run_sweep(&study, &args.estimators, args.dgp.r)?;
    let path = args.common.out.as_deref();
    let out = open_output(path)?;
    match args.common.format.unwrap_or(Format::Csv) {
        Format::Csv => write_sweep_csv(&rows, out),
        Format::Json => write_json(&rows, out, path),
    }
}
