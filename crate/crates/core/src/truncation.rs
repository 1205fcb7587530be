//! One-sided upper truncation of propensity scores at an empirical quantile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid of candidate truncation levels γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationGrid {
    gammas: Vec<f64>,
    gamma_min: f64,
    gamma_max: f64,
    step: f64,
}

impl TruncationGrid {
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn gamma_min(&self) -> f64 {
        self.gamma_min
    }

    pub fn gamma_max(&self) -> f64 {
        self.gamma_max
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gammas.is_empty()
    }

    /// Grid containing only γ = 1 (no truncation).
    pub fn untruncated() -> Self {
        Self {
            gammas: vec![1.0],
            gamma_min: 1.0,
            gamma_max: 1.0,
            step: 1.0,
        }
    }

    /// Grid from an explicit strictly increasing list in (0, 1].
    pub fn from_values(gammas: Vec<f64>) -> Result<Self> {
        let (first, last) = match (gammas.first(), gammas.last()) {
            (Some(&f), Some(&l)) => (f, l),
            _ => return Err(Error::EmptyInput),
        };
        if gammas.iter().any(|g| !(*g > 0.0 && *g <= 1.0)) {
            return Err(Error::Domain("grid values must lie in (0, 1]".into()));
        }
        if gammas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("grid values must be strictly increasing".into()));
        }
        let step = if gammas.len() > 1 { gammas[1] - gammas[0] } else { 1.0 };
        Ok(Self {
            gammas,
            gamma_min: first,
            gamma_max: last,
            step,
        })
    }

    /// Index of `gamma` within the grid, matched to 1e-9.
    pub fn position(&self, gamma: f64) -> Option<usize> {
        self.gammas.iter().position(|g| (g - gamma).abs() < 1e-9)
    }
}

impl Default for TruncationGrid {
    fn default() -> Self {
        make_grid(0.60, 1.00, 0.01).expect("default grid is valid")
    }
}

/// Arithmetic sequence from `gamma_min` to `gamma_max`; the upper endpoint
/// is always included.
pub fn make_grid(gamma_min: f64, gamma_max: f64, step: f64) -> Result<TruncationGrid> {
    if !(gamma_min > 0.0 && gamma_min < gamma_max && gamma_max <= 1.0) {
        return Err(Error::Domain(format!(
            "need 0 < gamma_min < gamma_max <= 1, got [{gamma_min}, {gamma_max}]"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("grid step must be positive, got {step}")));
    }
    // Index-based generation avoids accumulated drift; values are rounded
    // to 12 decimals so 0.6 + 3·0.01 prints and compares as 0.63.
    let round = |v: f64| (v * 1e12).round() / 1e12;
    let mut gammas = Vec::new();
    let mut k = 0usize;
    loop {
        let g = round(gamma_min + k as f64 * step);
        if g > gamma_max + 1e-12 {
            break;
        }
        gammas.push(g.min(gamma_max));
        k += 1;
    }
    let last = *gammas.last().expect("gamma_min is always in the grid");
    if (last - gamma_max).abs() > 1e-12 {
        gammas.push(gamma_max);
    } else if let Some(l) = gammas.last_mut() {
        *l = gamma_max;
    }
    Ok(TruncationGrid {
        gammas,
        gamma_min,
        gamma_max,
        step,
    })
}

/// The ⌈γ·n⌉-th smallest value (lower empirical quantile).
pub fn empirical_quantile(values: &[f64], gamma: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_of_sorted(&sorted, gamma)
}

pub(crate) fn quantile_of_sorted(sorted: &[f64], gamma: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("quantile level must lie in (0, 1], got {gamma}")));
    }
    let n = sorted.len();
    // Guard the product against rounding just above an integer (0.7·10).
    let rank = ((gamma * n as f64) - 1e-9).ceil().max(1.0) as usize;
    Ok(sorted[rank.min(n) - 1])
}

/// `min(ps_i, q_γ(ps))` elementwise.
pub fn truncate_upper(ps: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let cap = empirical_quantile(ps, gamma)?;
    Ok(cap_at(ps, cap))
}

pub(crate) fn cap_at(ps: &[f64], cap: f64) -> Vec<f64> {
    ps.iter().map(|&p| if p <= cap { p } else { cap }).collect()
}
