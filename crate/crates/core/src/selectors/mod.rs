//! Data-adaptive choice of the truncation level γ.
//!
//! * [`cv_select_gamma`]: V-fold cross-validated negative log-likelihood of
//!   the truncated propensity score.
//! * [`mv_select_gamma`]: IC variance plus squared bias estimated from
//!   repeated half-sample splits.
//! * [`ctmle_select`]: collaborative TMLE over a staged sequence of
//!   fluctuations, selected by cross-validated outcome loss.

mod candidates;
mod ctmle;
mod cv;
mod folds;
mod mv;

pub use candidates::{generate_candidates, CandidateSequence, TmleCandidate};
pub use ctmle::{ctmle_select, CtmleSelection};
pub use cv::{cv_select_gamma, CvSelection};
pub use folds::FoldAssignment;
pub use mv::{mv_select_gamma, MvSelection};

pub(crate) use candidates::build_candidates;

use serde::{Deserialize, Serialize};

use crate::nuisance::PropensityModel;

/// Settings shared by the selectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    /// Number of cross-validation folds V.
    pub folds: usize,
    /// Number of half-sample splits for the MV selector.
    pub k_repeats: usize,
    pub seed: u64,
    /// Propensity model refitted on training folds and half samples.
    pub propensity: PropensityModel,
    pub level: f64,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            folds: 5,
            k_repeats: 10,
            seed: 0,
            propensity: PropensityModel::selector(),
            level: 0.95,
        }
    }
}

impl SelectorConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Index of the smallest loss; ties go to the later index (larger γ).
/// NaN losses never win.
pub(crate) fn argmin_prefer_larger(losses: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in losses.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v > b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_go_to_larger_index() {
        assert_eq!(argmin_prefer_larger(&[3.0, 1.0, 2.0, 1.0, 5.0]), Some(3));
        assert_eq!(argmin_prefer_larger(&[f64::NAN, 2.0]), Some(1));
        assert_eq!(argmin_prefer_larger(&[f64::NAN]), None);
        assert_eq!(argmin_prefer_larger(&[]), None);
    }
}
