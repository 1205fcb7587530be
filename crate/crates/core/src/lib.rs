//! Average treatment effect estimation with data-adaptive truncation of the
//! propensity score.
//!
//! The crate fits parametric nuisance models ([`glm`], [`nuisance`]),
//! truncates the estimated propensity score at an empirical quantile
//! ([`truncation`]), and estimates the effect with IPW, Hajek-IPW, A-IPW or
//! TMLE ([`estimators`]). The truncation level can be fixed or chosen by
//! cross-validation, by a variance/bias trade-off, or collaboratively
//! ([`selectors`]). [`simulation`] runs Monte Carlo studies of all of these
//! under a design with tunable positivity violations.

pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod nuisance;
pub mod rng;
pub mod selectors;
pub mod simulation;
pub mod truncation;

pub use data::Dataset;
pub use error::{Error, Result};
pub use estimators::{AteEstimate, Estimator, OutcomeFit};
pub use nuisance::{OutcomeModel, PropensityModel};
pub use selectors::SelectorConfig;
pub use truncation::{make_grid, truncate_upper, TruncationGrid};
