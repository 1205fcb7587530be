//! Staged candidate construction for the collaborative TMLE.
//!
//! Stage k starts from the current initial fit (the untargeted fit at
//! k = 1). In search mode every remaining γ is tried and the fluctuation
//! with the smallest empirical loss fixes the stage point γ_k; in replay
//! mode γ_k is read from a supplied list. All grid points between the
//! previous stage point (exclusive) and γ_k (inclusive) are recorded as
//! candidates targeted from the stage's initial fit; the fit at γ_k becomes
//! the next stage's initial fit, and the search continues over (γ_k, γ_max].

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::OutcomeFit;
use crate::selectors::argmin_prefer_larger;
use crate::truncation::{cap_at, quantile_of_sorted, TruncationGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct TmleCandidate {
    pub gamma: f64,
    /// 1-based stage that produced this candidate.
    pub stage: usize,
    pub q_star: OutcomeFit,
    /// Mean quasi-binomial loss over the fitting rows.
    pub empirical_loss: f64,
    pub ps_truncated: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSequence {
    /// One candidate per grid point, in grid order.
    pub candidates: Vec<TmleCandidate>,
    /// Selected fluctuation points γ_1 < γ_2 < … (ends at γ_max).
    pub stage_points: Vec<f64>,
    /// Initial fit of each stage; `stage_initials[k - 1]` seeds stage k.
    pub stage_initials: Vec<OutcomeFit>,
}

impl CandidateSequence {
    pub fn candidate(&self, gamma: f64) -> Option<&TmleCandidate> {
        self.candidates.iter().find(|c| (c.gamma - gamma).abs() < 1e-9)
    }

    pub fn initial_for(&self, candidate: &TmleCandidate) -> &OutcomeFit {
        &self.stage_initials[candidate.stage - 1]
    }
}

/// Build the full candidate sequence on `data` with propensity scores `ps`.
/// Pass `stage_points` to replay a previously selected sequence.
pub fn generate_candidates(
    q0: &OutcomeFit,
    data: &Dataset,
    ps: &[f64],
    grid: &TruncationGrid,
    stage_points: Option<&[f64]>,
) -> Result<CandidateSequence> {
    if ps.len() != data.len() || q0.len() != data.len() {
        return Err(Error::Shape("q0, ps and data must have the same length".into()));
    }
    let y_scaled = q0.scaling.scale_all(data.outcome());
    build_candidates(q0, data.treatment(), &y_scaled, ps, None, grid, stage_points)
}

/// Truncated propensity vectors for every grid point, with the quantile
/// taken over `fit_rows` only.
fn truncated_grid(ps: &[f64], fit_rows: Option<&[usize]>, grid: &TruncationGrid) -> Result<Vec<Vec<f64>>> {
    let mut sorted: Vec<f64> = match fit_rows {
        Some(rows) => rows.iter().map(|&i| ps[i]).collect(),
        None => ps.to_vec(),
    };
    sorted.sort_by(f64::total_cmp);
    grid.gammas()
        .iter()
        .map(|&g| Ok(cap_at(ps, quantile_of_sorted(&sorted, g)?)))
        .collect()
}

fn replay_indices(grid: &TruncationGrid, points: &[f64]) -> Result<Vec<usize>> {
    let mut indices = Vec::with_capacity(points.len());
    for &p in points {
        let idx = grid
            .position(p)
            .ok_or_else(|| Error::Domain(format!("stage point {p} is not in the grid")))?;
        if indices.last().is_some_and(|&last| idx <= last) {
            return Err(Error::Domain("stage points must be strictly increasing".into()));
        }
        indices.push(idx);
    }
    if indices.last() != Some(&(grid.len() - 1)) {
        return Err(Error::Domain("stage points must end at the largest grid value".into()));
    }
    Ok(indices)
}

/// Core of [`generate_candidates`]. Fluctuations are fitted on `fit_rows`
/// (all rows when `None`) and applied to every row, so held-out rows get
/// predictions from each candidate.
pub(crate) fn build_candidates(
    q0: &OutcomeFit,
    treatment: &[bool],
    y_scaled: &[f64],
    ps: &[f64],
    fit_rows: Option<&[usize]>,
    grid: &TruncationGrid,
    stage_points: Option<&[f64]>,
) -> Result<CandidateSequence> {
    if grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    let truncated = truncated_grid(ps, fit_rows, grid)?;
    let replay = stage_points.map(|p| replay_indices(grid, p)).transpose()?;

    let mut candidates: Vec<TmleCandidate> = Vec::with_capacity(grid.len());
    let mut stage_points = Vec::new();
    let mut stage_initials = Vec::new();
    let mut current = q0.clone();
    let mut start = 0usize;
    let mut stage = 1usize;

    while start < grid.len() {
        let fluctuate = |idx: usize, initial: &OutcomeFit| -> Result<(OutcomeFit, f64)> {
            let fit = initial.fluctuate(treatment, &truncated[idx], y_scaled, fit_rows)?;
            let loss = fit.empirical_loss(y_scaled, fit_rows);
            Ok((fit, loss))
        };

        let (stage_end, mut fits) = match &replay {
            None => {
                let fits = (start..grid.len())
                    .map(|idx| fluctuate(idx, &current))
                    .collect::<Result<Vec<_>>>()?;
                let losses: Vec<f64> = fits.iter().map(|(_, l)| *l).collect();
                let best = argmin_prefer_larger(&losses)
                    .ok_or_else(|| Error::Domain("all candidate losses are NaN".into()))?;
                let mut fits = fits;
                fits.truncate(best + 1);
                (start + best, fits)
            }
            Some(indices) => {
                let end = *indices.get(stage - 1).ok_or_else(|| {
                    Error::Domain("replay ran out of stage points before the grid was exhausted".into())
                })?;
                let fits = (start..=end)
                    .map(|idx| fluctuate(idx, &current))
                    .collect::<Result<Vec<_>>>()?;
                (end, fits)
            }
        };

        let next_initial = fits.last().expect("stage records at least one candidate").0.clone();
        for (offset, (fit, loss)) in fits.drain(..).enumerate() {
            let idx = start + offset;
            candidates.push(TmleCandidate {
                gamma: grid.gammas()[idx],
                stage,
                q_star: fit,
                empirical_loss: loss,
                ps_truncated: truncated[idx].clone(),
            });
        }
        stage_initials.push(std::mem::replace(&mut current, next_initial));
        stage_points.push(grid.gammas()[stage_end]);
        start = stage_end + 1;
        stage += 1;
    }

    Ok(CandidateSequence {
        candidates,
        stage_points,
        stage_initials,
    })
}
