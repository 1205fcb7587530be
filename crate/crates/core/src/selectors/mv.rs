use rand::seq::SliceRandom;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{tmle_estimate, OutcomeFit};
use crate::rng::stream_rng;
use crate::selectors::{argmin_prefer_larger, SelectorConfig};
use crate::truncation::{truncate_upper, TruncationGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct MvSelection {
    pub gamma: f64,
    /// Squared IC-based SE of the full-data TMLE at each γ.
    pub variance: Vec<f64>,
    /// Split-averaged squared bias estimate at each γ.
    pub bias_squared: Vec<f64>,
    pub failed_splits: usize,
}

impl MvSelection {
    pub fn mse(&self) -> Vec<f64> {
        self.variance
            .iter()
            .zip(&self.bias_squared)
            .map(|(v, b)| v + b)
            .collect()
    }
}

/// Repeated half-split MSE selector for TMLE.
///
/// `ps` are full-data propensity scores and `q0` the full-data initial fit.
/// Each split refits the propensity model on both halves; the initial fit
/// is restricted to the rows of each half.
pub fn mv_select_gamma(
    data: &Dataset,
    ps: &[f64],
    q0: &OutcomeFit,
    grid: &TruncationGrid,
    config: &SelectorConfig,
) -> Result<MvSelection> {
    let n = data.len();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    if config.k_repeats == 0 {
        return Err(Error::Domain("k_repeats must be at least 1".into()));
    }
    let variance = grid
        .gammas()
        .iter()
        .map(|&gamma| {
            let truncated = truncate_upper(ps, gamma)?;
            let (estimate, _) = tmle_estimate(data, &truncated, q0)?;
            Ok(estimate.se * estimate.se)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut bias_sum = vec![0.0; grid.len()];
    let mut succeeded = 0usize;
    for split in 0..config.k_repeats {
        if let Ok(bias) = split_bias(data, q0, grid, config, split as u64) {
            for (total, b) in bias_sum.iter_mut().zip(bias) {
                *total += b;
            }
            succeeded += 1;
        }
    }
    if succeeded == 0 {
        return Err(Error::AllSplitsFailed(config.k_repeats));
    }
    let bias_squared: Vec<f64> = bias_sum.iter().map(|b| b / succeeded as f64).collect();
    let mse: Vec<f64> = variance.iter().zip(&bias_squared).map(|(v, b)| v + b).collect();
    let best = argmin_prefer_larger(&mse).ok_or_else(|| Error::Domain("all MV risks are NaN".into()))?;
    Ok(MvSelection {
        gamma: grid.gammas()[best],
        variance,
        bias_squared,
        failed_splits: config.k_repeats - succeeded,
    })
}

/// Rows of the two halves for one split, each in ascending order.
pub(crate) fn half_split(n: usize, seed: u64, split: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream_rng(seed, split));
    let (first, second) = order.split_at(n / 2);
    let mut first = first.to_vec();
    let mut second = second.to_vec();
    first.sort_unstable();
    second.sort_unstable();
    (first, second)
}

fn split_bias(
    data: &Dataset,
    q0: &OutcomeFit,
    grid: &TruncationGrid,
    config: &SelectorConfig,
    split: u64,
) -> Result<Vec<f64>> {
    let (first, second) = half_split(data.len(), config.seed, split);

    let reference_data = data.select_rows(&second);
    let reference_ps = config.propensity.fit(&reference_data)?.ps;
    let (reference, _) = tmle_estimate(&reference_data, &reference_ps, &q0.select_rows(&second))?;

    let half = data.select_rows(&first);
    let half_q0 = q0.select_rows(&first);
    let half_ps = config.propensity.fit(&half)?.ps;
    grid.gammas()
        .iter()
        .map(|&gamma| {
            let truncated = truncate_upper(&half_ps, gamma)?;
            let (estimate, _) = tmle_estimate(&half, &truncated, &half_q0)?;
            let diff = estimate.psi - reference.psi;
            Ok(diff * diff)
        })
        .collect()
}
