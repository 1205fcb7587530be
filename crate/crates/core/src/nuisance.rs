//! Main-terms nuisance models: logistic propensity score on all covariates
//! and a linear initial outcome regression on the scaled outcome.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{scale_outcome, OutcomeFit};
use crate::glm::{fit_logistic, fit_ols, predict_proba, DesignMatrix, LogisticFit};

/// Ridge used by the data-adaptive selectors when refitting on subsamples.
pub const SELECTOR_RIDGE: f64 = 1e-8;

/// Fitted propensity model and its predictions for every row of the data
/// it was evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct PropensityFit {
    pub model: LogisticFit,
    pub ps: Vec<f64>,
}

/// Main-terms logistic regression of A on an intercept and all covariates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    pub ridge: f64,
}

impl Default for PropensityModel {
    fn default() -> Self {
        Self { ridge: 0.0 }
    }
}

impl PropensityModel {
    pub fn new(ridge: f64) -> Self {
        Self { ridge }
    }

    pub fn selector() -> Self {
        Self { ridge: SELECTOR_RIDGE }
    }

    fn design(data: &Dataset) -> Result<DesignMatrix> {
        DesignMatrix::from_row_major(data.len(), data.n_covariates(), data.covariates(), true)
    }

    /// Fit on all rows and predict on all rows.
    pub fn fit(&self, data: &Dataset) -> Result<PropensityFit> {
        let x = Self::design(data)?;
        let model = fit_logistic(&x, &data.treatment_f64(), self.ridge)?;
        let ps = predict_proba(&model, &x)?;
        Ok(PropensityFit { model, ps })
    }

    /// Fit on `rows` only and predict on every row of `data`.
    pub fn fit_rows(&self, data: &Dataset, rows: &[usize]) -> Result<PropensityFit> {
        let x = Self::design(data)?;
        let a = data.treatment_f64();
        let y: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
        let model = fit_logistic(&x.select_rows(rows), &y, self.ridge)?;
        let ps = predict_proba(&model, &x)?;
        Ok(PropensityFit { model, ps })
    }
}

/// Linear regression of the scaled outcome on an intercept, A and a subset
/// of covariates (all covariates when `covariates` is `None`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    /// Zero-based covariate indices.
    pub covariates: Option<Vec<usize>>,
}

impl OutcomeModel {
    pub fn all_covariates() -> Self {
        Self { covariates: None }
    }

    pub fn with_covariates(covariates: Vec<usize>) -> Self {
        Self {
            covariates: Some(covariates),
        }
    }

    fn columns(&self, data: &Dataset) -> Result<Vec<usize>> {
        match &self.covariates {
            None => Ok((0..data.n_covariates()).collect()),
            Some(cols) => {
                if let Some(bad) = cols.iter().find(|&&j| j >= data.n_covariates()) {
                    return Err(Error::Domain(format!(
                        "outcome covariate index {bad} out of range for {} covariates",
                        data.n_covariates()
                    )));
                }
                Ok(cols.clone())
            }
        }
    }

    fn design(data: &Dataset, columns: &[usize], treatment: impl Fn(usize) -> f64) -> Result<DesignMatrix> {
        let width = columns.len() + 1;
        let mut values = Vec::with_capacity(data.len() * width);
        for i in 0..data.len() {
            values.push(treatment(i));
            values.extend(columns.iter().map(|&j| data.covariate(i, j)));
        }
        DesignMatrix::from_row_major(data.len(), width, &values, true)
    }

    /// Scale Y to [0, 1], regress, and predict at (A,W), (1,W), (0,W).
    pub fn fit_initial(&self, data: &Dataset) -> Result<OutcomeFit> {
        let (y_scaled, scaling) = scale_outcome(data.outcome())?;
        let columns = self.columns(data)?;
        let a = data.treatment_f64();
        let x = Self::design(data, &columns, |i| a[i])?;
        let fit = fit_ols(&x, &y_scaled)?;
        let q1 = fit.predict(&Self::design(data, &columns, |_| 1.0)?)?;
        let q0 = fit.predict(&Self::design(data, &columns, |_| 0.0)?)?;
        OutcomeFit::from_scaled_predictions(data.treatment(), &q1, &q0, scaling)
    }
}
