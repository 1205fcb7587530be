use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimators::{z_multiplier, AteEstimate};
use crate::simulation::dgp::DgpConfig;
use crate::simulation::runner::sample_sd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub message: String,
}

/// Per-replication results of one method, as parallel arrays.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Replicates {
    pub replication: Vec<usize>,
    pub psi: Vec<f64>,
    pub se: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub gamma: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub bias: f64,
    /// Empirical SD of the point estimates (divide by R − 1).
    pub se: f64,
    pub mse: f64,
    pub coverage: f64,
    pub mean_gamma: Option<f64>,
    /// Mean of the IC-based standard errors.
    pub mean_est_se: f64,
    pub replications: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<Replicates>,
}

/// A row of the CI coverage table. Starred methods use the Monte Carlo
/// ("true") SE instead of the estimated one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub method: String,
    pub coverage: f64,
    /// SE used for the interval (mean estimated SE for unstarred rows).
    pub se: f64,
    pub mean_width: f64,
    /// Mean width relative to the first starred row.
    pub relative_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub dgp: DgpConfig,
    pub replications: usize,
    pub truth: f64,
    pub failures: Vec<ReplicationFailure>,
    pub methods: Vec<MethodSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub coverage: Vec<CoverageRow>,
}

pub(crate) fn summarize(method: &str, records: &[(usize, AteEstimate)], truth: f64) -> MethodSummary {
    let r = records.len() as f64;
    let mut reps = Replicates::default();
    for (index, e) in records {
        reps.replication.push(*index);
        reps.psi.push(e.psi);
        reps.se.push(e.se);
        reps.ci_lower.push(e.ci_lower);
        reps.ci_upper.push(e.ci_upper);
        reps.gamma.push(e.gamma);
    }
    let mean_psi = reps.psi.iter().sum::<f64>() / r;
    let mse = reps.psi.iter().map(|p| (p - truth) * (p - truth)).sum::<f64>() / r;
    let covered = records.iter().filter(|(_, e)| e.covers(truth)).count();
    let mean_gamma = reps
        .gamma
        .iter()
        .copied()
        .collect::<Option<Vec<f64>>>()
        .map(|g| g.iter().sum::<f64>() / r);
    MethodSummary {
        method: method.to_string(),
        bias: mean_psi - truth,
        se: sample_sd(&reps.psi),
        mse,
        coverage: covered as f64 / r,
        mean_gamma,
        mean_est_se: reps.se.iter().sum::<f64>() / r,
        replications: records.len(),
        replicates: Some(reps),
    }
}

impl SimulationReport {
    pub fn method(&self, label: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == label)
    }

    pub fn succeeded(&self) -> usize {
        self.replications - self.failures.len()
    }

    /// Drop per-replication arrays.
    pub fn without_replicates(mut self) -> Self {
        for m in &mut self.methods {
            m.replicates = None;
        }
        self
    }

    /// Fill the coverage table: one starred row per `(method, true_se)`
    /// pair, followed by the matching estimated-SE rows.
    pub fn attach_true_se(&mut self, true_se: &[(String, f64)], level: f64) -> Result<()> {
        let z = z_multiplier(level)?;
        let mut starred = Vec::new();
        let mut estimated = Vec::new();
        for (label, se) in true_se {
            let Some(summary) = self.method(label) else { continue };
            let Some(reps) = &summary.replicates else { continue };
            let r = reps.psi.len() as f64;
            let covered = reps
                .psi
                .iter()
                .filter(|&&p| p - z * se <= self.truth && self.truth <= p + z * se)
                .count();
            starred.push(CoverageRow {
                method: format!("{label}*"),
                coverage: covered as f64 / r,
                se: *se,
                mean_width: 2.0 * z * se,
                relative_width: 0.0,
            });
            let width = reps
                .ci_upper
                .iter()
                .zip(&reps.ci_lower)
                .map(|(u, l)| u - l)
                .sum::<f64>()
                / r;
            estimated.push(CoverageRow {
                method: label.clone(),
                coverage: summary.coverage,
                se: summary.mean_est_se,
                mean_width: width,
                relative_width: 0.0,
            });
        }
        let reference = starred.first().map_or(1.0, |row| row.mean_width);
        let mut rows: Vec<CoverageRow> = starred.into_iter().chain(estimated).collect();
        for row in &mut rows {
            row.relative_width = if reference > 0.0 {
                row.mean_width / reference
            } else {
                f64::NAN
            };
        }
        self.coverage = rows;
        Ok(())
    }

    pub fn coverage_row(&self, label: &str) -> Option<&CoverageRow> {
        self.coverage.iter().find(|r| r.method == label)
    }

    pub fn write_methods_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "method",
            "bias",
            "se",
            "mse",
            "coverage",
            "mean_gamma",
            "mean_est_se",
            "replications",
        ])?;
        for m in &self.methods {
            wtr.write_record([
                m.method.clone(),
                m.bias.to_string(),
                m.se.to_string(),
                m.mse.to_string(),
                m.coverage.to_string(),
                m.mean_gamma.map(|g| g.to_string()).unwrap_or_default(),
                m.mean_est_se.to_string(),
                m.replications.to_string(),
            ])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_coverage_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["method", "coverage", "se", "mean_width", "relative_width"])?;
        for row in &self.coverage {
            wtr.write_record([
                row.method.clone(),
                row.coverage.to_string(),
                row.se.to_string(),
                row.mean_width.to_string(),
                row.relative_width.to_string(),
            ])?;
        }
        wtr.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// One line of a fixed-γ sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub estimator: String,
    pub gamma: f64,
    pub bias: f64,
    pub se: f64,
    pub mse: f64,
    #[serde(rename = "R")]
    pub r: usize,
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(csv::Error::from)?;
    Ok(())
}
