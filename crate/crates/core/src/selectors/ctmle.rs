use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::estimators::{targeted_estimate, AteEstimate, OutcomeFit};
use crate::selectors::{argmin_prefer_larger, build_candidates, FoldAssignment, SelectorConfig};
use crate::truncation::TruncationGrid;

#[derive(Debug, Clone, PartialEq)]
pub struct CtmleSelection {
    pub estimate: AteEstimate,
    /// γ with the smallest cross-validated loss.
    pub gamma: f64,
    /// γ of the final re-targeting step (≤ `gamma`).
    pub retarget_gamma: f64,
    pub q_star: OutcomeFit,
    pub cv_losses: Vec<f64>,
    pub stage_points: Vec<f64>,
}

/// Collaborative TMLE with a data-adaptive truncation level.
///
/// 1. Build the staged candidate sequence on the full data.
/// 2. For each fold, refit the propensity model on the training rows and
///    replay the full-data stage points on them; score every candidate by
///    its mean quasi-binomial loss on the validation rows.
/// 3. Take the γ with the smallest fold-averaged loss and the initial fit
///    of its stage.
/// 4. Re-target that initial fit with every γ' ≤ γ and keep the fit with
///    the smallest empirical loss.
pub fn ctmle_select(
    q0: &OutcomeFit,
    data: &Dataset,
    ps: &[f64],
    grid: &TruncationGrid,
    config: &SelectorConfig,
) -> Result<CtmleSelection> {
    let n = data.len();
    if ps.len() != n || q0.len() != n {
        return Err(Error::Shape("q0, ps and data must have the same length".into()));
    }
    let v = config.folds;
    if n < 2 * v {
        return Err(Error::InsufficientData { needed: 2 * v, got: n });
    }
    let y_scaled = q0.scaling.scale_all(data.outcome());
    let treatment = data.treatment();

    let full = build_candidates(q0, treatment, &y_scaled, ps, None, grid, None)?;

    let folds = FoldAssignment::new(n, v, config.seed)?;
    let mut cv_losses = vec![0.0; grid.len()];
    for fold in 0..v {
        let wrap = |e: Error| Error::Fold {
            fold,
            source: Box::new(e),
        };
        let train = folds.training_rows(fold);
        let valid = folds.validation_rows(fold);
        let fold_ps = config.propensity.fit_rows(data, &train).map_err(wrap)?.ps;
        let sequence = build_candidates(
            q0,
            treatment,
            &y_scaled,
            &fold_ps,
            Some(&train),
            grid,
            Some(&full.stage_points),
        )
        .map_err(wrap)?;
        for (total, candidate) in cv_losses.iter_mut().zip(&sequence.candidates) {
            *total += candidate.q_star.empirical_loss(&y_scaled, Some(&valid)) / v as f64;
        }
    }

    let chosen = argmin_prefer_larger(&cv_losses).ok_or_else(|| Error::Domain("all CV losses are NaN".into()))?;
    let initial = full.initial_for(&full.candidates[chosen]);

    let mut best: Option<(usize, OutcomeFit, f64)> = None;
    for (idx, candidate) in full.candidates.iter().enumerate().take(chosen + 1) {
        let fit = initial.fluctuate(treatment, &candidate.ps_truncated, &y_scaled, None)?;
        let loss = fit.empirical_loss(&y_scaled, None);
        if best.as_ref().is_none_or(|(_, _, b)| loss <= *b) {
            best = Some((idx, fit, loss));
        }
    }
    let (final_idx, q_star, _) = best.expect("chosen index is in range");

    let gamma = grid.gammas()[chosen];
    let retarget_gamma = grid.gammas()[final_idx];
    let estimate = targeted_estimate(
        "C-TMLE",
        data,
        &full.candidates[final_idx].ps_truncated,
        &q_star,
        config.level,
    )?
    .with_gamma(Some(gamma))
    .with_diagnostic("retarget_gamma", retarget_gamma)
    .with_diagnostic("stages", full.stage_points.len() as f64);

    Ok(CtmleSelection {
        estimate,
        gamma,
        retarget_gamma,
        q_star,
        cv_losses,
        stage_points: full.stage_points,
    })
}
