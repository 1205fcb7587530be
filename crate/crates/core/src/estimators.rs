//! Average-treatment-effect estimators: IPW, Hajek-IPW, augmented IPW and
//! TMLE with a logistic fluctuation on the min-max scaled outcome.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm::{expit, fit_offset_logistic, logistic_nll, logit};

/// Clamp for initial outcome predictions on the scaled [0, 1] scale.
pub const OUTCOME_FLOOR: f64 = 1e-6;

/// Affine map between the outcome and [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeScaling {
    pub lower: f64,
    pub upper: f64,
}

impl OutcomeScaling {
    pub fn identity() -> Self {
        Self { lower: 0.0, upper: 1.0 }
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn scale(&self, y: f64) -> f64 {
        (y - self.lower) / self.range()
    }

    pub fn unscale(&self, s: f64) -> f64 {
        self.lower + self.range() * s
    }

    pub fn scale_all(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|&v| self.scale(v).clamp(0.0, 1.0)).collect()
    }
}

/// Min-max scale `y` into [0, 1].
pub fn scale_outcome(y: &[f64]) -> Result<(Vec<f64>, OutcomeScaling)> {
    if y.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: y.len(),
        });
    }
    let lower = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let upper = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if upper <= lower || upper.is_nan() {
        return Err(Error::DegenerateOutcome);
    }
    let scaling = OutcomeScaling { lower, upper };
    Ok((scaling.scale_all(y), scaling))
}

/// Outcome predictions on the original scale: at the observed treatment,
/// under treatment, and under control.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterfactualPredictions {
    pub observed: Vec<f64>,
    pub treated: Vec<f64>,
    pub control: Vec<f64>,
}

impl CounterfactualPredictions {
    pub fn zeros(n: usize) -> Self {
        Self {
            observed: vec![0.0; n],
            treated: vec![0.0; n],
            control: vec![0.0; n],
        }
    }
}

/// A (possibly fluctuated) fit of E[Y | A, W] on the scaled outcome.
///
/// Predictions are held on the logit scale so that repeated fluctuations
/// never lose precision near 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeFit {
    logit_aw: Vec<f64>,
    logit_1w: Vec<f64>,
    logit_0w: Vec<f64>,
    pub scaling: OutcomeScaling,
    /// Fluctuation coefficients applied so far, oldest first.
    pub epsilons: Vec<f64>,
}

impl OutcomeFit {
    /// Initial fit from scaled counterfactual predictions; each value is
    /// clamped into `[1e-6, 1 - 1e-6]` before taking logits.
    pub fn from_scaled_predictions(
        treatment: &[bool],
        q_1w: &[f64],
        q_0w: &[f64],
        scaling: OutcomeScaling,
    ) -> Result<Self> {
        let n = treatment.len();
        if q_1w.len() != n || q_0w.len() != n {
            return Err(Error::Shape(
                "prediction vectors differ in length from treatment".into(),
            ));
        }
        let to_logit = |q: f64| logit(q.clamp(OUTCOME_FLOOR, 1.0 - OUTCOME_FLOOR));
        let logit_1w: Vec<f64> = q_1w.iter().map(|&q| to_logit(q)).collect();
        let logit_0w: Vec<f64> = q_0w.iter().map(|&q| to_logit(q)).collect();
        let logit_aw = treatment
            .iter()
            .enumerate()
            .map(|(i, &t)| if t { logit_1w[i] } else { logit_0w[i] })
            .collect();
        Ok(Self {
            logit_aw,
            logit_1w,
            logit_0w,
            scaling,
            epsilons: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.logit_aw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logit_aw.is_empty()
    }

    pub fn q_aw(&self) -> Vec<f64> {
        self.logit_aw.iter().map(|&l| expit(l)).collect()
    }

    pub fn q_1w(&self) -> Vec<f64> {
        self.logit_1w.iter().map(|&l| expit(l)).collect()
    }

    pub fn q_0w(&self) -> Vec<f64> {
        self.logit_0w.iter().map(|&l| expit(l)).collect()
    }

    pub fn logit_aw(&self) -> &[f64] {
        &self.logit_aw
    }

    /// Predictions mapped back to the original outcome units.
    pub fn unscaled(&self) -> CounterfactualPredictions {
        let map = |v: &[f64]| v.iter().map(|&l| self.scaling.unscale(expit(l))).collect();
        CounterfactualPredictions {
            observed: map(&self.logit_aw),
            treated: map(&self.logit_1w),
            control: map(&self.logit_0w),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect();
        Self {
            logit_aw: pick(&self.logit_aw),
            logit_1w: pick(&self.logit_1w),
            logit_0w: pick(&self.logit_0w),
            scaling: self.scaling,
            epsilons: self.epsilons.clone(),
        }
    }

    /// Mean quasi-binomial loss of the observed-treatment prediction against
    /// scaled outcomes, over `rows` (all rows when `None`).
    pub fn empirical_loss(&self, y_scaled: &[f64], rows: Option<&[usize]>) -> f64 {
        match rows {
            Some(rows) => {
                rows.iter()
                    .map(|&i| logistic_nll(y_scaled[i], self.logit_aw[i]))
                    .sum::<f64>()
                    / rows.len() as f64
            }
            None => {
                y_scaled
                    .iter()
                    .zip(&self.logit_aw)
                    .map(|(&y, &l)| logistic_nll(y, l))
                    .sum::<f64>()
                    / y_scaled.len() as f64
            }
        }
    }

    /// Plug-in effect `mean(Q(1,W) - Q(0,W))` in original units.
    pub fn plug_in_effect(&self) -> f64 {
        let diff: f64 = self
            .logit_1w
            .iter()
            .zip(&self.logit_0w)
            .map(|(&l1, &l0)| expit(l1) - expit(l0))
            .sum();
        self.scaling.range() * diff / self.len() as f64
    }

    /// One logistic fluctuation along the clever covariate built from `ps`.
    /// ε is fitted on `fit_rows` (all rows when `None`); the update is
    /// applied to every row.
    pub fn fluctuate(
        &self,
        treatment: &[bool],
        ps: &[f64],
        y_scaled: &[f64],
        fit_rows: Option<&[usize]>,
    ) -> Result<Self> {
        let n = self.len();
        if treatment.len() != n || ps.len() != n || y_scaled.len() != n {
            return Err(Error::Shape(format!(
                "fluctuation inputs: fit has {n} rows, treatment {}, ps {}, y {}",
                treatment.len(),
                ps.len(),
                y_scaled.len()
            )));
        }
        let h = clever_covariate(treatment, ps);
        let epsilon = match fit_rows {
            None => fit_offset_logistic(&self.logit_aw, &h, y_scaled)?,
            Some(rows) => {
                let pick = |v: &[f64]| -> Vec<f64> { rows.iter().map(|&i| v[i]).collect() };
                fit_offset_logistic(&pick(&self.logit_aw), &pick(&h), &pick(y_scaled))?
            }
        };
        let mut logit_1w = self.logit_1w.clone();
        let mut logit_0w = self.logit_0w.clone();
        for i in 0..n {
            logit_1w[i] += epsilon * (1.0 / ps[i]);
            logit_0w[i] += epsilon * (-1.0 / (1.0 - ps[i]));
        }
        let logit_aw = treatment
            .iter()
            .enumerate()
            .map(|(i, &t)| if t { logit_1w[i] } else { logit_0w[i] })
            .collect();
        let mut epsilons = self.epsilons.clone();
        epsilons.push(epsilon);
        Ok(Self {
            logit_aw,
            logit_1w,
            logit_0w,
            scaling: self.scaling,
            epsilons,
        })
    }
}

/// `A/ps - (1 - A)/(1 - ps)`.
pub fn clever_covariate(treatment: &[bool], ps: &[f64]) -> Vec<f64> {
    treatment
        .iter()
        .zip(ps)
        .map(|(&t, &p)| if t { 1.0 / p } else { -1.0 / (1.0 - p) })
        .collect()
}

fn check_lengths(data: &Dataset, ps: &[f64]) -> Result<()> {
    if ps.len() != data.len() {
        return Err(Error::Shape(format!(
            "{} propensity scores for {} observations",
            ps.len(),
            data.len()
        )));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn ipw_terms(data: &Dataset, ps: &[f64]) -> Vec<f64> {
    data.treatment()
        .iter()
        .zip(data.outcome())
        .zip(ps)
        .map(|((&t, &y), &p)| if t { y / p } else { -y / (1.0 - p) })
        .collect()
}

/// Horvitz-Thompson inverse probability weighting.
pub fn ipw(data: &Dataset, ps: &[f64]) -> Result<f64> {
    check_lengths(data, ps)?;
    Ok(mean(&ipw_terms(data, ps)))
}

struct HajekParts {
    psi: f64,
    mu1: f64,
    mu0: f64,
    norm1: f64,
    norm0: f64,
}

fn hajek_parts(data: &Dataset, ps: &[f64]) -> Result<HajekParts> {
    check_lengths(data, ps)?;
    let (mut s1, mut n1, mut s0, mut n0) = (0.0, 0.0, 0.0, 0.0);
    for ((&t, &y), &p) in data.treatment().iter().zip(data.outcome()).zip(ps) {
        if t {
            s1 += y / p;
            n1 += 1.0 / p;
        } else {
            s0 += y / (1.0 - p);
            n0 += 1.0 / (1.0 - p);
        }
    }
    if n1 == 0.0 {
        return Err(Error::EmptyArm(1));
    }
    if n0 == 0.0 {
        return Err(Error::EmptyArm(0));
    }
    let (mu1, mu0) = (s1 / n1, s0 / n0);
    let n = data.len() as f64;
    Ok(HajekParts {
        psi: mu1 - mu0,
        mu1,
        mu0,
        norm1: n1 / n,
        norm0: n0 / n,
    })
}

/// Hajek-type IPW: inverse weights normalized within each arm.
pub fn hajek_ipw(data: &Dataset, ps: &[f64]) -> Result<f64> {
    Ok(hajek_parts(data, ps)?.psi)
}

fn check_predictions(data: &Dataset, q: &CounterfactualPredictions) -> Result<()> {
    let n = data.len();
    if q.observed.len() != n || q.treated.len() != n || q.control.len() != n {
        return Err(Error::Shape("outcome predictions differ in length from data".into()));
    }
    Ok(())
}

/// Augmented IPW with outcome predictions in original units.
pub fn aipw(data: &Dataset, ps: &[f64], q: &CounterfactualPredictions) -> Result<f64> {
    check_lengths(data, ps)?;
    check_predictions(data, q)?;
    let h = clever_covariate(data.treatment(), ps);
    let total: f64 = (0..data.len())
        .map(|i| h[i] * (data.outcome()[i] - q.observed[i]) + q.treated[i] - q.control[i])
        .sum();
    Ok(total / data.len() as f64)
}

/// `IC_i = H_i (Y_i - Q(A_i,W_i)) + Q(1,W_i) - Q(0,W_i) - ψ`.
pub fn influence_curve(data: &Dataset, ps: &[f64], q: &CounterfactualPredictions, psi: f64) -> Result<Vec<f64>> {
    check_lengths(data, ps)?;
    check_predictions(data, q)?;
    let h = clever_covariate(data.treatment(), ps);
    Ok((0..data.len())
        .map(|i| h[i] * (data.outcome()[i] - q.observed[i]) + q.treated[i] - q.control[i] - psi)
        .collect())
}

/// Standard error and symmetric CI half-widths from an influence curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcInterval {
    pub se: f64,
    pub lower_offset: f64,
    pub upper_offset: f64,
}

/// Normal quantile for a two-sided interval; 0.95 maps to exactly 1.96.
pub fn z_multiplier(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain(format!(
            "confidence level must lie in (0, 1), got {level}"
        )));
    }
    if (level - 0.95).abs() < 1e-12 {
        return Ok(1.96);
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// `se = sd(IC) / √n` with the divide-by-n variance.
pub fn ic_confidence_interval(ic: &[f64], level: f64) -> Result<IcInterval> {
    if ic.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: ic.len(),
        });
    }
    let z = z_multiplier(level)?;
    let n = ic.len() as f64;
    let m = mean(ic);
    let second = ic.iter().map(|v| v * v).sum::<f64>() / n;
    let variance = (second - m * m).max(0.0);
    let se = variance.sqrt() / n.sqrt();
    Ok(IcInterval {
        se,
        lower_offset: -z * se,
        upper_offset: z * se,
    })
}

/// Point estimate with IC-based uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub method: String,
    pub psi: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub gamma: Option<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl AteEstimate {
    pub fn from_influence_curve(method: impl Into<String>, psi: f64, ic: &[f64], level: f64) -> Result<Self> {
        let interval = ic_confidence_interval(ic, level)?;
        Ok(Self {
            method: method.into(),
            psi,
            se: interval.se,
            ci_lower: psi + interval.lower_offset,
            ci_upper: psi + interval.upper_offset,
            gamma: None,
            diagnostics: BTreeMap::new(),
        })
    }

    pub fn with_gamma(mut self, gamma: Option<f64>) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.insert(key.to_string(), value);
        self
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.ci_lower <= truth && truth <= self.ci_upper
    }
}

fn max_abs_weight(data: &Dataset, ps: &[f64]) -> f64 {
    clever_covariate(data.treatment(), ps)
        .into_iter()
        .fold(0.0, |m, h| m.max(h.abs()))
}

/// Targeted estimate from an already-fluctuated fit, with the IC built
/// from the propensity scores used in its last fluctuation.
pub fn targeted_estimate(
    method: &str,
    data: &Dataset,
    ps: &[f64],
    q_star: &OutcomeFit,
    level: f64,
) -> Result<AteEstimate> {
    let psi = q_star.plug_in_effect();
    let ic = influence_curve(data, ps, &q_star.unscaled(), psi)?;
    let mut estimate = AteEstimate::from_influence_curve(method, psi, &ic, level)?
        .with_diagnostic("max_weight", max_abs_weight(data, ps));
    if let Some(&eps) = q_star.epsilons.last() {
        estimate = estimate.with_diagnostic("epsilon", eps);
    }
    Ok(estimate)
}

/// TMLE: one logistic fluctuation of `q0` along the clever covariate,
/// then the plug-in mean difference.
pub fn tmle_estimate(data: &Dataset, ps: &[f64], q0: &OutcomeFit) -> Result<(AteEstimate, OutcomeFit)> {
    tmle_estimate_at_level(data, ps, q0, 0.95)
}

pub fn tmle_estimate_at_level(
    data: &Dataset,
    ps: &[f64],
    q0: &OutcomeFit,
    level: f64,
) -> Result<(AteEstimate, OutcomeFit)> {
    check_lengths(data, ps)?;
    if q0.len() != data.len() {
        return Err(Error::Shape("initial fit differs in length from data".into()));
    }
    let y_scaled = q0.scaling.scale_all(data.outcome());
    let q_star = q0.fluctuate(data.treatment(), ps, &y_scaled, None)?;
    let estimate = targeted_estimate("TMLE", data, ps, &q_star, level)?;
    Ok((estimate, q_star))
}

/// Which point estimator to apply to a (possibly truncated) PS vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ipw,
    Hajek,
    Aipw,
    Tmle,
}

impl Estimator {
    pub const ALL: [Estimator; 4] = [Estimator::Ipw, Estimator::Hajek, Estimator::Aipw, Estimator::Tmle];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::Ipw => "IPW",
            Estimator::Hajek => "Hajek-IPW",
            Estimator::Aipw => "A-IPW",
            Estimator::Tmle => "TMLE",
        }
    }

    /// Estimate with IC-based SE. `q0` is the initial outcome fit; it is
    /// used as-is by A-IPW and fluctuated by TMLE.
    pub fn estimate(self, data: &Dataset, ps: &[f64], q0: &OutcomeFit, level: f64) -> Result<AteEstimate> {
        let estimate = match self {
            Estimator::Ipw => {
                let terms = ipw_terms(data, ps);
                let psi = mean(&terms);
                let ic: Vec<f64> = terms.iter().map(|t| t - psi).collect();
                AteEstimate::from_influence_curve(self.label(), psi, &ic, level)?
            }
            Estimator::Hajek => {
                let parts = hajek_parts(data, ps)?;
                let ic: Vec<f64> = (0..data.len())
                    .map(|i| {
                        let y = data.outcome()[i];
                        if data.treatment()[i] {
                            (y - parts.mu1) / (ps[i] * parts.norm1)
                        } else {
                            -(y - parts.mu0) / ((1.0 - ps[i]) * parts.norm0)
                        }
                    })
                    .collect();
                AteEstimate::from_influence_curve(self.label(), parts.psi, &ic, level)?
            }
            Estimator::Aipw => {
                let q = q0.unscaled();
                let psi = aipw(data, ps, &q)?;
                let ic = influence_curve(data, ps, &q, psi)?;
                AteEstimate::from_influence_curve(self.label(), psi, &ic, level)?
            }
            Estimator::Tmle => tmle_estimate_at_level(data, ps, q0, level)?.0,
        };
        Ok(estimate.with_diagnostic("max_weight", max_abs_weight(data, ps)))
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Ipw => "ipw",
            Estimator::Hajek => "hajek",
            Estimator::Aipw => "aipw",
            Estimator::Tmle => "tmle",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ipw" => Ok(Estimator::Ipw),
            "hajek" | "hajek-ipw" => Ok(Estimator::Hajek),
            "aipw" | "a-ipw" => Ok(Estimator::Aipw),
            "tmle" => Ok(Estimator::Tmle),
            other => Err(Error::Domain(format!(
                "unknown estimator `{other}` (expected ipw, hajek, aipw or tmle)"
            ))),
        }
    }
}
