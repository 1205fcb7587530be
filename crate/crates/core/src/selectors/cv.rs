use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::selectors::{argmin_prefer_larger, FoldAssignment, SelectorConfig};
use crate::truncation::{quantile_of_sorted, TruncationGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct CvSelection {
    pub gamma: f64,
    /// Fold-averaged validation loss, one entry per grid point.
    pub losses: Vec<f64>,
}

/// Cross-validated treatment negative log-likelihood of the truncated PS.
///
/// Within each fold the propensity model is refitted on the training rows
/// and its training-row predictions define the truncation quantile; the
/// loss is evaluated on the validation rows.
pub fn cv_select_gamma(data: &Dataset, grid: &TruncationGrid, config: &SelectorConfig) -> Result<CvSelection> {
    let v = config.folds;
    if data.len() < 2 * v {
        return Err(Error::InsufficientData {
            needed: 2 * v,
            got: data.len(),
        });
    }
    let folds = FoldAssignment::new(data.len(), v, config.seed)?;
    let mut losses = vec![0.0; grid.len()];
    for fold in 0..v {
        let fold_loss = fold_losses(data, grid, config, &folds, fold).map_err(|e| Error::Fold {
            fold,
            source: Box::new(e),
        })?;
        for (total, l) in losses.iter_mut().zip(fold_loss) {
            *total += l / v as f64;
        }
    }
    let best = argmin_prefer_larger(&losses).ok_or_else(|| Error::Domain("all CV losses are NaN".into()))?;
    Ok(CvSelection {
        gamma: grid.gammas()[best],
        losses,
    })
}

fn fold_losses(
    data: &Dataset,
    grid: &TruncationGrid,
    config: &SelectorConfig,
    folds: &FoldAssignment,
    fold: usize,
) -> Result<Vec<f64>> {
    let train = folds.training_rows(fold);
    let valid = folds.validation_rows(fold);
    let fit = config.propensity.fit_rows(data, &train)?;
    let mut sorted: Vec<f64> = train.iter().map(|&i| fit.ps[i]).collect();
    sorted.sort_by(f64::total_cmp);
    let a = data.treatment();
    grid.gammas()
        .iter()
        .map(|&gamma| {
            let cap = quantile_of_sorted(&sorted, gamma)?;
            let total: f64 = valid
                .iter()
                .map(|&i| {
                    let p = fit.ps[i].min(cap);
                    if a[i] {
                        -p.ln()
                    } else {
                        -(1.0 - p).ln()
                    }
                })
                .sum();
            Ok(total / valid.len() as f64)
        })
        .collect()
}
