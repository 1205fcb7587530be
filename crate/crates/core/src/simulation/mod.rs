//! Monte Carlo study of the truncation selectors under a design with
//! tunable positivity violations.

mod dgp;
mod report;
mod runner;

pub use dgp::{sample_dataset, true_ate, true_propensity, DgpConfig, N_COVARIATES};
pub use report::{
    write_sweep_csv, CoverageRow, MethodSummary, Replicates, ReplicationFailure, SimulationReport, SweepRow,
};
pub use runner::{
    estimate_methods, monte_carlo_sd_with, monte_carlo_true_se, monte_carlo_true_ses, run_replications, sample_sd,
    true_se_seed, Method, StudyConfig,
};

use crate::error::Result;
use crate::estimators::Estimator;

/// Run a fixed-γ sweep and flatten it into rows grouped by estimator with
/// γ increasing.
pub fn run_sweep(study: &StudyConfig, estimators: &[Estimator], replications: usize) -> Result<Vec<SweepRow>> {
    let methods = Method::fixed_sweep(estimators, &study.grid);
    let report = run_replications(study, &methods, replications)?;
    Ok(methods
        .iter()
        .zip(&report.methods)
        .map(|(method, summary)| {
            let (estimator, gamma) = match method {
                Method::Fixed { estimator, gamma } => (*estimator, *gamma),
                _ => unreachable!("sweep only contains fixed methods"),
            };
            SweepRow {
                estimator: estimator.to_string(),
                gamma,
                bias: summary.bias,
                se: summary.se,
                mse: summary.mse,
                r: summary.replications,
            }
        })
        .collect())
}
