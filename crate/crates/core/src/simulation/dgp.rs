use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::expit;

pub const N_COVARIATES: usize = 20;

/// Data-generating process with a positivity parameter `c`: larger values
/// push the true propensity scores toward 1.
///
/// * W ~ N(0, Σ) with unit variances and exchangeable correlation `rho`
///   (0 by default; even rho = 0.1 inflates the variance of the PS linear
///   predictor from about 2.4 to 4.4).
/// * P(A = 1 | W) = expit(W1 + W2 + 0.15·Σ_{j ≥ sum_from} Wj + c).
/// * Y = 2 + 2(W1 + W2 + W5 + W6 + W8) + effect·A + N(0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgpConfig {
    #[serde(rename = "C")]
    pub positivity: f64,
    pub n: usize,
    pub p: usize,
    pub rho: f64,
    pub seed: u64,
    /// First covariate (1-based) of the 3/20-weighted block: 3 or 2.
    pub sum_from: usize,
    pub treatment_effect: f64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            positivity: 0.0,
            n: 1000,
            p: N_COVARIATES,
            rho: 0.0,
            seed: 0,
            sum_from: 3,
            treatment_effect: 2.0,
        }
    }
}

impl DgpConfig {
    pub fn new(positivity: f64, n: usize, seed: u64) -> Self {
        Self {
            positivity,
            n,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 30 {
            return Err(Error::Domain(format!(
                "sample size must be at least 30, got {}",
                self.n
            )));
        }
        if self.p != N_COVARIATES {
            return Err(Error::Domain(format!(
                "the design has {N_COVARIATES} covariates, got p = {}",
                self.p
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Domain(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if self.sum_from != 2 && self.sum_from != 3 {
            return Err(Error::Domain(format!("sum_from must be 2 or 3, got {}", self.sum_from)));
        }
        if !self.positivity.is_finite() || !self.treatment_effect.is_finite() {
            return Err(Error::Domain("C and the treatment effect must be finite".into()));
        }
        Ok(())
    }

    fn linear_predictor(&self, w: &[f64]) -> f64 {
        let block: f64 = w[self.sum_from - 1..].iter().sum();
        w[0] + w[1] + 0.15 * block + self.positivity
    }
}

/// True propensity scores of the rows of `data`.
pub fn true_propensity(config: &DgpConfig, data: &Dataset) -> Vec<f64> {
    data.covariates()
        .chunks(data.n_covariates())
        .map(|w| expit(config.linear_predictor(w)))
        .collect()
}

/// Replication `replication` of the design; each replication draws from
/// its own ChaCha stream keyed by `(seed, replication)`.
pub fn sample_dataset(config: &DgpConfig, replication: u64) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    rng.set_stream(replication);
    let (shared, own) = (config.rho.sqrt(), (1.0 - config.rho).sqrt());
    let p = config.p;
    let mut w = Vec::with_capacity(config.n * p);
    let mut a = Vec::with_capacity(config.n);
    let mut y = Vec::with_capacity(config.n);
    let mut row = vec![0.0; p];
    for _ in 0..config.n {
        let common: f64 = rng.sample(StandardNormal);
        for v in row.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = shared * common + own * z;
        }
        let treated = rng.gen::<f64>() < expit(config.linear_predictor(&row));
        let noise: f64 = rng.sample(StandardNormal);
        let mean = 2.0
            + 2.0 * (row[0] + row[1] + row[4] + row[5] + row[7])
            + if treated { config.treatment_effect } else { 0.0 };
        w.extend_from_slice(&row);
        a.push(treated);
        y.push(mean + noise);
    }
    Dataset::new(y, a, w, p)
}

/// E(Y1) - E(Y0) under the design.
pub fn true_ate(config: &DgpConfig) -> f64 {
    config.treatment_effect
}
