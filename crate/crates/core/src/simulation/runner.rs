use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{AteEstimate, Estimator};
use crate::nuisance::{OutcomeModel, PropensityModel};
use crate::rng::derive_seed;
use crate::selectors::{ctmle_select, cv_select_gamma, mv_select_gamma, SelectorConfig};
use crate::simulation::dgp::{sample_dataset, true_ate, DgpConfig};
use crate::simulation::report::{summarize, ReplicationFailure, SimulationReport};
use crate::truncation::{truncate_upper, TruncationGrid};

/// An estimator paired with a way of choosing γ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Method {
    Fixed { estimator: Estimator, gamma: f64 },
    Cv(Estimator),
    MvTmle,
    CTmle,
}

impl Method {
    pub fn label(&self) -> String {
        match self {
            Method::Fixed { estimator, gamma } => format!("{}@{gamma}", estimator.label()),
            Method::Cv(estimator) => format!("CV-{}", estimator.label()),
            Method::MvTmle => "MV-TMLE".to_string(),
            Method::CTmle => "C-TMLE".to_string(),
        }
    }

    /// The three data-adaptive TMLE variants.
    pub fn adaptive_tmle() -> Vec<Method> {
        vec![Method::Cv(Estimator::Tmle), Method::MvTmle, Method::CTmle]
    }

    /// Every estimator at every grid point, grouped by estimator.
    pub fn fixed_sweep(estimators: &[Estimator], grid: &TruncationGrid) -> Vec<Method> {
        estimators
            .iter()
            .flat_map(|&estimator| {
                grid.gammas()
                    .iter()
                    .map(move |&gamma| Method::Fixed { estimator, gamma })
            })
            .collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    /// Accepts `c-tmle`, `mv-tmle`, `cv-<estimator>` and `<estimator>@<γ>`.
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "c-tmle" | "ctmle" => return Ok(Method::CTmle),
            "mv-tmle" | "mv" => return Ok(Method::MvTmle),
            _ => {}
        }
        if let Some(rest) = lower.strip_prefix("cv-") {
            return Ok(Method::Cv(rest.parse()?));
        }
        if let Some((name, gamma)) = lower.split_once('@') {
            let gamma: f64 = gamma
                .parse()
                .map_err(|_| Error::Domain(format!("bad truncation level in method `{s}`")))?;
            if !(gamma > 0.0 && gamma <= 1.0) {
                return Err(Error::Domain(format!("truncation level must lie in (0, 1] in `{s}`")));
            }
            return Ok(Method::Fixed {
                estimator: name.parse()?,
                gamma,
            });
        }
        Err(Error::Domain(format!(
            "unknown method `{s}` (expected c-tmle, mv-tmle, cv-<estimator> or <estimator>@<gamma>)"
        )))
    }
}

/// Everything a replication needs besides its index.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub dgp: DgpConfig,
    pub grid: TruncationGrid,
    /// Selector settings; the seed is re-derived for every replication.
    pub selector: SelectorConfig,
    /// Full-data propensity model.
    pub propensity: PropensityModel,
    pub outcome: OutcomeModel,
    /// Worker threads; results do not depend on this.
    pub jobs: usize,
}

impl StudyConfig {
    /// Defaults of the simulation design: 41-point grid from 0.60 to 1.00,
    /// V = 5, 10 half splits, initial outcome regression on A and W3..W10.
    pub fn new(dgp: DgpConfig) -> Self {
        Self {
            dgp,
            grid: TruncationGrid::default(),
            selector: SelectorConfig::default(),
            propensity: PropensityModel::default(),
            outcome: OutcomeModel::with_covariates((2..10).collect()),
            jobs: 1,
        }
    }

    pub fn with_grid(mut self, grid: TruncationGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs;
        self
    }
}

/// Run every method on one dataset with pre-fitted nuisances.
pub fn estimate_methods(
    data: &Dataset,
    methods: &[Method],
    grid: &TruncationGrid,
    propensity: &PropensityModel,
    outcome: &OutcomeModel,
    selector: &SelectorConfig,
) -> Result<Vec<AteEstimate>> {
    let ps = propensity.fit(data)?.ps;
    let q0 = outcome.fit_initial(data)?;
    let mut cv_gamma: Option<f64> = None;
    let mut mv_gamma: Option<f64> = None;
    methods
        .iter()
        .map(|method| {
            let estimate = match *method {
                Method::Fixed { estimator, gamma } => {
                    let truncated = truncate_upper(&ps, gamma)?;
                    estimator
                        .estimate(data, &truncated, &q0, selector.level)?
                        .with_gamma(Some(gamma))
                }
                Method::Cv(estimator) => {
                    let gamma = match cv_gamma {
                        Some(g) => g,
                        None => *cv_gamma.insert(cv_select_gamma(data, grid, selector)?.gamma),
                    };
                    let truncated = truncate_upper(&ps, gamma)?;
                    estimator
                        .estimate(data, &truncated, &q0, selector.level)?
                        .with_gamma(Some(gamma))
                }
                Method::MvTmle => {
                    let gamma = match mv_gamma {
                        Some(g) => g,
                        None => *mv_gamma.insert(mv_select_gamma(data, &ps, &q0, grid, selector)?.gamma),
                    };
                    let truncated = truncate_upper(&ps, gamma)?;
                    Estimator::Tmle
                        .estimate(data, &truncated, &q0, selector.level)?
                        .with_gamma(Some(gamma))
                }
                Method::CTmle => ctmle_select(&q0, data, &ps, grid, selector)?.estimate,
            };
            Ok(AteEstimate {
                method: method.label(),
                ..estimate
            })
        })
        .collect()
}

fn run_one(study: &StudyConfig, methods: &[Method], replication: usize) -> Result<Vec<AteEstimate>> {
    let data = sample_dataset(&study.dgp, replication as u64)?;
    let selector = study
        .selector
        .with_seed(derive_seed(study.dgp.seed, replication as u64));
    estimate_methods(
        &data,
        methods,
        &study.grid,
        &study.propensity,
        &study.outcome,
        &selector,
    )
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot start worker pool: {e}")))
}

/// Map `f` over `0..count` on `jobs` workers, returning results in index
/// order.
pub(crate) fn par_map<T, F>(jobs: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    Ok(thread_pool(jobs)?.install(|| (0..count).into_par_iter().map(f).collect()))
}

/// Monte Carlo study: `replications` independent datasets, every method on
/// each, aggregated in replication order.
pub fn run_replications(study: &StudyConfig, methods: &[Method], replications: usize) -> Result<SimulationReport> {
    if replications < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: replications,
        });
    }
    if methods.is_empty() {
        return Err(Error::Domain("no methods requested".into()));
    }
    study.dgp.validate()?;
    let outcomes = par_map(study.jobs, replications, |r| run_one(study, methods, r))?;

    let mut failures = Vec::new();
    let mut per_method: Vec<Vec<(usize, AteEstimate)>> = vec![Vec::new(); methods.len()];
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(estimates) => {
                for (slot, estimate) in per_method.iter_mut().zip(estimates) {
                    slot.push((r, estimate));
                }
            }
            Err(e) => failures.push(ReplicationFailure {
                replication: r,
                message: e.to_string(),
            }),
        }
    }
    if failures.len() * 20 > replications {
        let first = &failures[0];
        return Err(Error::ReplicationFailures {
            failed: failures.len(),
            total: replications,
            first_index: first.replication,
            first_message: first.message.clone(),
        });
    }
    if failures.len() + 1 >= replications {
        return Err(Error::InsufficientData {
            needed: 2,
            got: replications - failures.len(),
        });
    }
    let truth = true_ate(&study.dgp);
    let summaries = methods
        .iter()
        .zip(&per_method)
        .map(|(m, records)| summarize(&m.label(), records, truth))
        .collect();
    Ok(SimulationReport {
        dgp: study.dgp,
        replications,
        truth,
        failures,
        methods: summaries,
        coverage: Vec::new(),
    })
}

/// Sample SD (divide by R − 1).
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Empirical SD of `method`'s point estimates over `replications`
/// independent datasets, used as the "true" SE of the estimator.
pub fn monte_carlo_true_se(study: &StudyConfig, method: Method, replications: usize) -> Result<f64> {
    Ok(monte_carlo_true_ses(study, &[method], replications)?[0])
}

/// [`monte_carlo_true_se`] for several methods sharing the same datasets.
pub fn monte_carlo_true_ses(study: &StudyConfig, methods: &[Method], replications: usize) -> Result<Vec<f64>> {
    if replications < 1000 {
        return Err(Error::Domain(format!(
            "true-SE simulation needs at least 1000 replications, got {replications}"
        )));
    }
    let report = run_replications(study, methods, replications)?;
    Ok(report.methods.iter().map(|m| m.se).collect())
}

/// Empirical SD of an arbitrary statistic over `replications` datasets
/// drawn from `dgp`.
pub fn monte_carlo_sd_with<F>(dgp: &DgpConfig, replications: usize, jobs: usize, statistic: F) -> Result<f64>
where
    F: Fn(&Dataset) -> Result<f64> + Sync + Send,
{
    let values = par_map(jobs, replications, |r| {
        sample_dataset(dgp, r as u64).and_then(|d| statistic(&d))
    })?
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(sample_sd(&values))
}

/// Seed for the independent true-SE simulation derived from a study seed.
pub fn true_se_seed(seed: u64) -> u64 {
    derive_seed(seed, u64::MAX)
}
