//! Fixtures and brute-force reference implementations shared by the
//! integration tests. The references are written for clarity, not speed,
//! and only use the library for model fitting and fold/split assignment.

#![allow(dead_code)]

use ctmle::data::Dataset;
use ctmle::estimators::{tmle_estimate, OutcomeFit};
use ctmle::nuisance::{OutcomeModel, PropensityModel};
use ctmle::rng::stream_rng;
use ctmle::selectors::FoldAssignment;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Small two-covariate dataset with moderate confounding.
pub fn small_dataset(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n);
    let mut a = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let w1: f64 = rng.sample(StandardNormal);
        let w2: f64 = rng.sample(StandardNormal);
        let treated = rng.gen::<f64>() < expit(0.4 + 0.9 * w1 - 0.5 * w2);
        let noise: f64 = rng.sample(StandardNormal);
        y.push(1.0 + w1 + 0.5 * w2 + if treated { 1.5 } else { 0.0 } + 0.5 * noise);
        a.push(treated);
        w.push(w1);
        w.push(w2);
    }
    Dataset::new(y, a, w, 2).unwrap()
}

/// Full-data nuisance fits: logistic PS on all covariates and the OLS
/// outcome regression on A and all covariates.
pub fn nuisances(data: &Dataset) -> (Vec<f64>, OutcomeFit) {
    let ps = PropensityModel::default().fit(data).unwrap().ps;
    let q0 = OutcomeModel::all_covariates().fit_initial(data).unwrap();
    (ps, q0)
}

/// The ⌈γm⌉-th smallest of `values` (m = len), by sorting.
pub fn oracle_quantile(values: &[f64], gamma: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = sorted.len();
    let mut k = 1;
    while (k as f64) < gamma * m as f64 - 1e-9 {
        k += 1;
    }
    sorted[k.min(m) - 1]
}

/// Index of the smallest value; on ties the last one wins.
pub fn oracle_argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..values.len() {
        if values[i] <= values[best] {
            best = i;
        }
    }
    best
}

pub fn nll(y: f64, q: f64) -> f64 {
    -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
}

/// Brute-force CV selector. Returns (chosen γ, fold-averaged losses).
pub fn oracle_cv(data: &Dataset, gammas: &[f64], folds: usize, seed: u64) -> (f64, Vec<f64>) {
    let assignment = FoldAssignment::new(data.len(), folds, seed).unwrap();
    let mut losses = vec![0.0; gammas.len()];
    for v in 0..folds {
        let train: Vec<usize> = (0..data.len()).filter(|&i| assignment.labels()[i] != v).collect();
        let valid: Vec<usize> = (0..data.len()).filter(|&i| assignment.labels()[i] == v).collect();
        let ps = PropensityModel::selector().fit_rows(data, &train).unwrap().ps;
        let train_ps: Vec<f64> = train.iter().map(|&i| ps[i]).collect();
        for (g, &gamma) in gammas.iter().enumerate() {
            let cap = oracle_quantile(&train_ps, gamma);
            let mut total = 0.0;
            for &i in &valid {
                let p = if ps[i] > cap { cap } else { ps[i] };
                let a = if data.treatment()[i] { 1.0 } else { 0.0 };
                total += nll(a, p);
            }
            losses[g] += total / valid.len() as f64 / folds as f64;
        }
    }
    (gammas[oracle_argmin(&losses)], losses)
}

fn cap_vector(ps: &[f64], gamma: f64) -> Vec<f64> {
    let cap = oracle_quantile(ps, gamma);
    ps.iter().map(|&p| p.min(cap)).collect()
}

/// Brute-force MV selector. Returns (chosen γ, variance, squared bias).
pub fn oracle_mv(
    data: &Dataset,
    ps: &[f64],
    q0: &OutcomeFit,
    gammas: &[f64],
    k: usize,
    seed: u64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let n = data.len();
    let variance: Vec<f64> = gammas
        .iter()
        .map(|&g| {
            let (e, _) = tmle_estimate(data, &cap_vector(ps, g), q0).unwrap();
            e.se * e.se
        })
        .collect();
    let mut bias = vec![0.0; gammas.len()];
    let mut used = 0;
    for split in 0..k {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut stream_rng(seed, split as u64));
        let mut first = order[..n / 2].to_vec();
        let mut second = order[n / 2..].to_vec();
        first.sort();
        second.sort();
        let one_split = || -> Option<Vec<f64>> {
            let d2 = data.select_rows(&second);
            let ps2 = PropensityModel::selector().fit(&d2).ok()?.ps;
            let (reference, _) = tmle_estimate(&d2, &ps2, &q0.select_rows(&second)).ok()?;
            let d1 = data.select_rows(&first);
            let ps1 = PropensityModel::selector().fit(&d1).ok()?.ps;
            let q1 = q0.select_rows(&first);
            gammas
                .iter()
                .map(|&g| {
                    let (e, _) = tmle_estimate(&d1, &cap_vector(&ps1, g), &q1).ok()?;
                    Some((e.psi - reference.psi).powi(2))
                })
                .collect()
        };
        if let Some(b) = one_split() {
            for (t, v) in bias.iter_mut().zip(b) {
                *t += v;
            }
            used += 1;
        }
    }
    let bias: Vec<f64> = bias.iter().map(|b| b / used as f64).collect();
    let risk: Vec<f64> = variance.iter().zip(&bias).map(|(v, b)| v + b).collect();
    (gammas[oracle_argmin(&risk)], variance, bias)
}

/// ε solving Σ h (y − expit(offset + ε h)) = 0, by bisection.
pub fn bisect_epsilon(offset: &[f64], h: &[f64], y: &[f64]) -> f64 {
    let score = |e: f64| -> f64 {
        offset
            .iter()
            .zip(h)
            .zip(y)
            .map(|((&o, &hi), &yi)| hi * (yi - expit(o + e * hi)))
            .sum()
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while score(lo) < 0.0 {
        lo *= 2.0;
    }
    while score(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One reference candidate: predictions at (A,W), (1,W), (0,W) on the
/// probability scale.
#[derive(Debug, Clone)]
pub struct OracleFit {
    pub q1: Vec<f64>,
    pub q0: Vec<f64>,
    pub qa: Vec<f64>,
}

impl OracleFit {
    pub fn from_outcome_fit(fit: &OutcomeFit, treatment: &[bool]) -> Self {
        let q1 = fit.q_1w();
        let q0 = fit.q_0w();
        let qa = treatment
            .iter()
            .enumerate()
            .map(|(i, &t)| if t { q1[i] } else { q0[i] })
            .collect();
        Self { q1, q0, qa }
    }

    fn fluctuate(&self, treatment: &[bool], ps: &[f64], y: &[f64]) -> OracleFit {
        let h: Vec<f64> = treatment
            .iter()
            .zip(ps)
            .map(|(&t, &p)| if t { 1.0 / p } else { -1.0 / (1.0 - p) })
            .collect();
        let offset: Vec<f64> = self.qa.iter().map(|&q| logit(q)).collect();
        let eps = bisect_epsilon(&offset, &h, y);
        let q1: Vec<f64> = self
            .q1
            .iter()
            .zip(ps)
            .map(|(&q, &p)| expit(logit(q) + eps / p))
            .collect();
        let q0: Vec<f64> = self
            .q0
            .iter()
            .zip(ps)
            .map(|(&q, &p)| expit(logit(q) - eps / (1.0 - p)))
            .collect();
        let qa = treatment
            .iter()
            .enumerate()
            .map(|(i, &t)| if t { q1[i] } else { q0[i] })
            .collect();
        OracleFit { q1, q0, qa }
    }

    pub fn loss(&self, y: &[f64]) -> f64 {
        self.qa.iter().zip(y).map(|(&q, &yi)| nll(yi, q)).sum::<f64>() / y.len() as f64
    }
}

/// Reference staged candidate construction. Returns per-γ (stage, fit)
/// and the stage points.
pub fn oracle_candidates(
    q0: &OutcomeFit,
    data: &Dataset,
    ps: &[f64],
    gammas: &[f64],
) -> (Vec<(usize, OracleFit)>, Vec<f64>) {
    let t = data.treatment();
    let y = q0.scaling.scale_all(data.outcome());
    let capped: Vec<Vec<f64>> = gammas.iter().map(|&g| cap_vector(ps, g)).collect();
    let mut current = OracleFit::from_outcome_fit(q0, t);
    let mut out = Vec::new();
    let mut points = Vec::new();
    let mut start = 0;
    let mut stage = 1;
    while start < gammas.len() {
        let fits: Vec<OracleFit> = (start..gammas.len())
            .map(|j| current.fluctuate(t, &capped[j], &y))
            .collect();
        let losses: Vec<f64> = fits.iter().map(|f| f.loss(&y)).collect();
        let best = oracle_argmin(&losses);
        for fit in fits.iter().take(best + 1) {
            out.push((stage, fit.clone()));
        }
        current = fits[best].clone();
        points.push(gammas[start + best]);
        start += best + 1;
        stage += 1;
    }
    (out, points)
}
