mod common;

use common::*;
use ctmle::data::Dataset;
use ctmle::estimators::{aipw, clever_covariate, hajek_ipw, ipw, tmle_estimate, CounterfactualPredictions};
use ctmle::simulation::{
    monte_carlo_sd_with, monte_carlo_true_se, run_replications, sample_dataset, true_propensity, DgpConfig, Method,
    StudyConfig,
};
use ctmle::truncation::truncate_upper;
use proptest::prelude::*;

fn score(data: &Dataset, ps: &[f64], y_scaled: &[f64], q_aw: &[f64]) -> f64 {
    let h = clever_covariate(data.treatment(), ps);
    h.iter()
        .zip(y_scaled)
        .zip(q_aw)
        .map(|((h, y), q)| h * (y - q))
        .sum::<f64>()
        / data.len() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tmle_solves_its_score_and_lowers_the_loss(seed in 0u64..10_000, n in 30usize..120, gamma in 0.7f64..=1.0) {
        let data = small_dataset(seed, n);
        let (ps, q0) = nuisances(&data);
        let truncated = truncate_upper(&ps, gamma).unwrap();
        if let Ok((_, q_star)) = tmle_estimate(&data, &truncated, &q0) {
            let y = q0.scaling.scale_all(data.outcome());
            prop_assert!(score(&data, &truncated, &y, &q_star.q_aw()).abs() <= 1e-8);
            prop_assert!(q_star.empirical_loss(&y, None) <= q0.empirical_loss(&y, None) + 1e-12);
        }
    }

    #[test]
    fn hajek_is_shift_invariant(seed in 0u64..10_000, shift in -50.0f64..50.0) {
        let data = small_dataset(seed, 40);
        let (ps, _) = nuisances(&data);
        let shifted = data.with_outcome(data.outcome().iter().map(|y| y + shift).collect()).unwrap();
        let a = hajek_ipw(&data, &ps).unwrap();
        let b = hajek_ipw(&shifted, &ps).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + shift.abs()) * 10.0, "{} vs {}", a, b);
    }

    #[test]
    fn aipw_with_zero_outcome_model_is_ipw(seed in 0u64..10_000, gamma in 0.6f64..=1.0) {
        let data = small_dataset(seed, 40);
        let (ps, _) = nuisances(&data);
        let truncated = truncate_upper(&ps, gamma).unwrap();
        let zero = CounterfactualPredictions::zeros(data.len());
        let a = aipw(&data, &truncated, &zero).unwrap();
        let b = ipw(&data, &truncated).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
    }

    #[test]
    fn full_truncation_level_is_identity(ps in prop::collection::vec(0.001f64..0.999, 1..80)) {
        prop_assert_eq!(truncate_upper(&ps, 1.0).unwrap(), ps);
    }

    #[test]
    fn tmle_stays_in_plug_in_range(seed in 0u64..10_000, gamma in 0.6f64..=1.0) {
        let data = small_dataset(seed, 60);
        let (ps, q0) = nuisances(&data);
        let truncated = truncate_upper(&ps, gamma).unwrap();
        if let Ok((estimate, _)) = tmle_estimate(&data, &truncated, &q0) {
            let range = q0.scaling.range();
            prop_assert!(estimate.psi.abs() <= range);
        }
    }
}

fn study(dgp: DgpConfig) -> StudyConfig {
    StudyConfig::new(dgp).with_jobs(2)
}

fn all_methods() -> Vec<Method> {
    ["cv-tmle", "mv-tmle", "c-tmle", "tmle@1", "ipw@1", "hajek@1", "aipw@1"]
        .iter()
        .map(|m| m.parse().unwrap())
        .collect()
}

#[test]
fn null_effect_is_estimated_without_bias() {
    let dgp = DgpConfig {
        treatment_effect: 0.0,
        ..DgpConfig::new(0.0, 1000, 41)
    };
    // Untruncated IPW-type estimators with a correctly specified PS model;
    // truncated and data-adaptive methods trade bias for variance by design.
    let methods: Vec<Method> = ["ipw@1", "hajek@1", "aipw@1"]
        .iter()
        .map(|m| m.parse().unwrap())
        .collect();
    let report = run_replications(&study(dgp), &methods, 200).unwrap();
    assert_eq!(report.truth, 0.0);
    for m in &report.methods {
        let band = 3.0 * m.se / (m.replications as f64).sqrt();
        assert!(m.bias.abs() <= band, "{}: bias {} exceeds {}", m.method, m.bias, band);
    }
}

#[test]
fn ipw_with_true_propensity_is_unbiased() {
    let dgp = DgpConfig::new(0.0, 1000, 5);
    let estimates: Vec<f64> = (0..1000u64)
        .map(|r| {
            let data = sample_dataset(&dgp, r).unwrap();
            ipw(&data, &true_propensity(&dgp, &data)).unwrap()
        })
        .collect();
    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let sd = (estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
    assert!((mean - 2.0).abs() <= 3.0 * sd / m.sqrt(), "mean {mean}, sd {sd}");
}

#[test]
fn mse_identity_holds_on_a_study() {
    let report = run_replications(&study(DgpConfig::new(1.0, 200, 2)), &all_methods(), 30).unwrap();
    for m in &report.methods {
        let r = m.replications as f64;
        let identity = m.bias * m.bias + (r - 1.0) / r * m.se * m.se;
        assert!((m.mse - identity).abs() <= 1e-12 * (1.0 + m.mse), "{}", m.method);
    }
}

#[test]
fn report_does_not_depend_on_worker_count() {
    let dgp = DgpConfig::new(2.0, 200, 9);
    let one = run_replications(&StudyConfig::new(dgp).with_jobs(1), &all_methods(), 12).unwrap();
    let four = run_replications(&StudyConfig::new(dgp).with_jobs(4), &all_methods(), 12).unwrap();
    assert_eq!(one, four);
}

#[test]
fn true_se_of_constant_statistic_is_zero() {
    let sd = monte_carlo_sd_with(&DgpConfig::new(0.0, 100, 1), 1000, 2, |_| Ok(2.0)).unwrap();
    assert_eq!(sd, 0.0);
}

#[test]
fn true_se_stabilizes() {
    let cfg = study(DgpConfig::new(1.0, 200, 77));
    let method: Method = "tmle@0.9".parse().unwrap();
    let se_r = monte_carlo_true_se(&cfg, method, 1000).unwrap();
    let se_2r = monte_carlo_true_se(&cfg, method, 2000).unwrap();
    assert!((se_r - se_2r).abs() / se_2r <= 0.1, "{se_r} vs {se_2r}");
}

#[test]
fn true_se_needs_many_replications() {
    let cfg = study(DgpConfig::new(1.0, 200, 77));
    assert!(monte_carlo_true_se(&cfg, Method::CTmle, 999).is_err());
}

#[test]
fn degenerate_grid_collapses_all_selectors() {
    let cfg = study(DgpConfig::new(1.0, 300, 4)).with_grid(ctmle::TruncationGrid::untruncated());
    let methods: Vec<Method> = ["cv-tmle", "c-tmle", "tmle@1"]
        .iter()
        .map(|m| m.parse().unwrap())
        .collect();
    let report = run_replications(&cfg, &methods, 2).unwrap();
    let reps: Vec<_> = report.methods.iter().map(|m| m.replicates.clone().unwrap()).collect();
    for other in &reps[1..] {
        for (a, b) in reps[0].psi.iter().zip(&other.psi) {
            assert!((a - b).abs() <= 1e-12);
        }
    }
}
