//! Parametric nuisance fits: logistic regression for the propensity score,
//! ordinary least squares for the initial outcome regression, and the
//! one-dimensional offset logistic solver used by the targeting step.
//!
//! Everything here is a pure function of its inputs. Linear systems are
//! small (a few dozen columns at most) and are solved with a dense Cholesky
//! factorization of the (weighted) normal equations.

use crate::error::{Error, Result};

/// Lower/upper clamp applied to every fitted probability.
pub const PROBABILITY_FLOOR: f64 = 1e-8;

/// Absolute deviance change that ends the IRLS loop.
pub const DEVIANCE_TOLERANCE: f64 = 1e-8;

pub const MAX_ITERATIONS: usize = 100;

const MAX_STEP_HALVINGS: usize = 40;

/// Dense row-major regressor matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    has_intercept: bool,
}

impl DesignMatrix {
    /// Build from row-major values. When `intercept` is set a column of ones
    /// is prepended, so the resulting matrix has `cols + 1` columns.
    pub fn from_row_major(rows: usize, cols: usize, values: &[f64], intercept: bool) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("design matrix has non-finite entries".into()));
        }
        let width = cols + usize::from(intercept);
        let mut out = Vec::with_capacity(rows * width);
        for row in values.chunks(cols.max(1)).take(rows) {
            if intercept {
                out.push(1.0);
            }
            if cols > 0 {
                out.extend_from_slice(row);
            }
        }
        if cols == 0 {
            out.resize(rows * width, 1.0);
        }
        Ok(Self {
            rows,
            cols: width,
            values: out,
            has_intercept: intercept,
        })
    }

    /// Build from a list of columns of equal length.
    pub fn from_columns(columns: &[&[f64]], intercept: bool) -> Result<Self> {
        let rows = match columns.first() {
            Some(c) => c.len(),
            None => return Err(Error::EmptyInput),
        };
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Shape("columns have different lengths".into()));
        }
        let cols = columns.len();
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            values.extend(columns.iter().map(|c| c[i]));
        }
        Self::from_row_major(rows, cols, &values, intercept)
    }

    /// Intercept-only design with `rows` rows.
    pub fn intercept_only(rows: usize) -> Self {
        Self {
            rows,
            cols: 1,
            values: vec![1.0; rows],
            has_intercept: true,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn has_intercept(&self) -> bool {
        self.has_intercept
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.values[i * self.cols + j]).collect()
    }

    /// Keep only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut values = Vec::with_capacity(rows.len() * self.cols);
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Self {
            rows: rows.len(),
            cols: self.cols,
            values,
            has_intercept: self.has_intercept,
        }
    }

    pub fn linear_predictor(&self, coefficients: &[f64]) -> Result<Vec<f64>> {
        if coefficients.len() != self.cols {
            return Err(Error::Shape(format!(
                "{} coefficients for a design with {} columns",
                coefficients.len(),
                self.cols
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), coefficients)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Unpenalized binomial deviance, -2 log L.
    pub final_deviance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    pub coefficients: Vec<f64>,
}

impl LinearFit {
    pub fn predict(&self, x: &DesignMatrix) -> Result<Vec<f64>> {
        x.linear_predictor(&self.coefficients)
    }
}

#[inline]
pub fn expit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// log(1 + e^x) without overflow.
#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Negative Bernoulli log-likelihood of `y` at linear predictor `eta`,
/// valid for fractional `y` in [0, 1].
#[inline]
pub(crate) fn logistic_nll(y: f64, eta: f64) -> f64 {
    softplus(eta) - y * eta
}

/// In-place lower Cholesky factor of a symmetric positive definite matrix.
fn cholesky(a: &mut [f64], d: usize) -> Result<()> {
    let scale = (0..d).map(|i| a[i * d + i].abs()).fold(0.0_f64, f64::max);
    let tol = scale * 1e-12;
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if diag <= tol || diag.is_nan() {
            return Err(Error::SingularDesign);
        }
        let diag = diag.sqrt();
        a[j * d + j] = diag;
        for i in (j + 1)..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = s / diag;
        }
    }
    Ok(())
}

fn cholesky_solve(l: &[f64], d: usize, b: &mut [f64]) {
    for i in 0..d {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * d + k] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
    for i in (0..d).rev() {
        let mut s = b[i];
        for k in (i + 1)..d {
            s -= l[k * d + i] * b[k];
        }
        b[i] = s / l[i * d + i];
    }
}

/// Solve (XᵀWX + ridge·I) β = rhs by Cholesky.
fn solve_weighted_normal(x: &DesignMatrix, weights: &[f64], ridge: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let d = x.cols;
    let mut gram = vec![0.0; d * d];
    for (i, &w) in weights.iter().enumerate() {
        let row = x.row(i);
        for a in 0..d {
            let wa = w * row[a];
            for b in 0..=a {
                gram[a * d + b] += wa * row[b];
            }
        }
    }
    for a in 0..d {
        gram[a * d + a] += ridge;
        for b in 0..a {
            gram[b * d + a] = gram[a * d + b];
        }
    }
    cholesky(&mut gram, d)?;
    let mut sol = rhs.to_vec();
    cholesky_solve(&gram, d, &mut sol);
    Ok(sol)
}

fn check_response(x: &DesignMatrix, len: usize) -> Result<()> {
    if len != x.rows {
        return Err(Error::Shape(format!(
            "response has {len} entries but design has {} rows",
            x.rows
        )));
    }
    if x.rows == 0 {
        return Err(Error::EmptyInput);
    }
    Ok(())
}

/// Ridge-penalized objective: -log L + ridge/2 ‖β‖².
fn penalized_objective(x: &DesignMatrix, y: &[f64], beta: &[f64], ridge: f64) -> f64 {
    let nll: f64 = (0..x.rows).map(|i| logistic_nll(y[i], dot(x.row(i), beta))).sum();
    nll + 0.5 * ridge * dot(beta, beta)
}

/// Logistic regression by Newton/IRLS with step-halving.
///
/// Minimizes `-log L(β) + ridge/2 ‖β‖²`; the intercept (if any) is
/// penalized like every other coefficient. Iteration stops once the
/// penalized objective changes by less than [`DEVIANCE_TOLERANCE`] on the
/// deviance scale.
pub fn fit_logistic(x: &DesignMatrix, y: &[f64], ridge: f64) -> Result<LogisticFit> {
    check_response(x, y.len())?;
    if ridge < 0.0 || !ridge.is_finite() {
        return Err(Error::Domain(format!(
            "ridge must be finite and non-negative, got {ridge}"
        )));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Domain("logistic response must be 0/1".into()));
    }
    let d = x.cols;
    let mut beta = vec![0.0; d];
    let mut objective = penalized_objective(x, y, &beta, ridge);
    let mut weights = vec![0.0; x.rows];
    let mut gradient = vec![0.0; d];

    for iteration in 1..=MAX_ITERATIONS {
        gradient.iter_mut().for_each(|g| *g = 0.0);
        for i in 0..x.rows {
            let row = x.row(i);
            let p = expit(dot(row, &beta));
            weights[i] = p * (1.0 - p);
            let r = y[i] - p;
            for (g, xv) in gradient.iter_mut().zip(row) {
                *g += r * xv;
            }
        }
        for (g, b) in gradient.iter_mut().zip(&beta) {
            *g -= ridge * b;
        }
        let step = solve_weighted_normal(x, &weights, ridge, &gradient)?;

        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_STEP_HALVINGS {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let value = penalized_objective(x, y, &candidate, ridge);
            if value.is_finite() && value <= objective {
                accepted = Some((candidate, value));
                break;
            }
            scale *= 0.5;
        }
        let Some((candidate, value)) = accepted else {
            // No descent direction left at floating-point resolution.
            return Ok(finish(x, y, beta, iteration, true));
        };
        let change = 2.0 * (objective - value);
        beta = candidate;
        objective = value;
        if change < DEVIANCE_TOLERANCE {
            return Ok(finish(x, y, beta, iteration, true));
        }
    }
    Err(Error::Convergence {
        what: "logistic IRLS",
        iterations: MAX_ITERATIONS,
        last: beta,
    })
}

fn finish(x: &DesignMatrix, y: &[f64], beta: Vec<f64>, iterations: usize, converged: bool) -> LogisticFit {
    let deviance = 2.0 * penalized_objective(x, y, &beta, 0.0);
    LogisticFit {
        coefficients: beta,
        converged,
        iterations,
        final_deviance: deviance.max(0.0),
    }
}

/// Least squares via the normal equations.
pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<LinearFit> {
    check_response(x, y.len())?;
    if x.rows < x.cols {
        return Err(Error::SingularDesign);
    }
    let d = x.cols;
    let mut rhs = vec![0.0; d];
    for (i, &yi) in y.iter().enumerate() {
        for (r, xv) in rhs.iter_mut().zip(x.row(i)) {
            *r += yi * xv;
        }
    }
    let weights = vec![1.0; x.rows];
    let coefficients = solve_weighted_normal(x, &weights, 0.0, &rhs)?;
    Ok(LinearFit { coefficients })
}

/// Fitted probabilities clamped into `[1e-8, 1 - 1e-8]`.
pub fn predict_proba(fit: &LogisticFit, x: &DesignMatrix) -> Result<Vec<f64>> {
    Ok(x.linear_predictor(&fit.coefficients)?
        .into_iter()
        .map(|eta| expit(eta).clamp(PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR))
        .collect())
}

/// Score of the offset logistic model, and minus its derivative.
fn offset_score(offset: &[f64], h: &[f64], y: &[f64], epsilon: f64) -> (f64, f64) {
    let mut score = 0.0;
    let mut information = 0.0;
    for ((&o, &hi), &yi) in offset.iter().zip(h).zip(y) {
        let p = expit(o + epsilon * hi);
        score += hi * (yi - p);
        information += hi * hi * p * (1.0 - p);
    }
    (score, information)
}

/// Fit the single coefficient ε of `logit E[y] = offset + ε·h`.
///
/// Solves Σ hᵢ (yᵢ − expit(offsetᵢ + ε hᵢ)) = 0 with a safeguarded Newton
/// iteration inside an expanding bracket. The score is non-increasing in ε,
/// so a finite root exists iff the score changes sign between ε → −∞ and
/// ε → +∞; when it does not, a convergence error is returned immediately.
pub fn fit_offset_logistic(offset: &[f64], h: &[f64], y: &[f64]) -> Result<f64> {
    let n = offset.len();
    if h.len() != n || y.len() != n {
        return Err(Error::Shape(format!(
            "offset/h/y lengths differ: {n}/{}/{}",
            h.len(),
            y.len()
        )));
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if offset.iter().any(|o| !o.is_finite()) {
        return Err(Error::Domain("non-finite offset".into()));
    }
    if y.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain("offset-logistic response must lie in [0, 1]".into()));
    }
    if h.iter().all(|&v| v == 0.0) {
        return Err(Error::DegenerateCovariate);
    }

    let target = 1e-10 * n as f64;
    let accept = 1e-8 * n as f64;

    let (mut score, mut information) = offset_score(offset, h, y, 0.0);
    if score.abs() <= target {
        return Ok(0.0);
    }

    // Limits of the score as ε → ±∞.
    let (mut upper_limit, mut lower_limit) = (0.0, 0.0);
    for (&hi, &yi) in h.iter().zip(y) {
        if hi > 0.0 {
            upper_limit += hi * (yi - 1.0);
            lower_limit += hi * yi;
        } else if hi < 0.0 {
            upper_limit += hi * yi;
            lower_limit += hi * (yi - 1.0);
        }
    }
    if (score > 0.0 && upper_limit >= 0.0) || (score < 0.0 && lower_limit <= 0.0) {
        return Err(Error::Convergence {
            what: "offset logistic (no finite root)",
            iterations: 0,
            last: vec![0.0],
        });
    }

    let mut epsilon = 0.0_f64;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for iteration in 1..=MAX_ITERATIONS {
        if score > 0.0 {
            lo = epsilon;
        } else {
            hi = epsilon;
        }
        let newton = if information > 0.0 {
            epsilon + score / information
        } else {
            f64::NAN
        };
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else if lo.is_finite() && hi.is_finite() {
            0.5 * (lo + hi)
        } else if lo.is_finite() {
            lo + lo.abs().max(1.0)
        } else {
            hi - hi.abs().max(1.0)
        };
        if next == epsilon || (lo.is_finite() && hi.is_finite() && (next == lo || next == hi)) {
            break;
        }
        epsilon = next;
        (score, information) = offset_score(offset, h, y, epsilon);
        if score.abs() <= target {
            return Ok(epsilon);
        }
        if iteration == MAX_ITERATIONS {
            break;
        }
    }
    if score.abs() <= accept {
        Ok(epsilon)
    } else {
        Err(Error::Convergence {
            what: "offset logistic",
            iterations: MAX_ITERATIONS,
            last: vec![epsilon],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn intercept_only_logistic_is_logit_of_mean() {
        let x = DesignMatrix::intercept_only(4);
        let fit = fit_logistic(&x, &[1.0, 0.0, 1.0, 0.0], 0.0).unwrap();
        assert!(fit.converged);
        assert!(fit.coefficients[0].abs() < 1e-10);

        let fit = fit_logistic(&x, &[1.0, 1.0, 1.0, 0.0], 0.0).unwrap();
        assert!((fit.coefficients[0] - 3.0_f64.ln()).abs() < 1e-8);
        assert!((fit.coefficients[0] - 1.0986).abs() < 1e-4);
    }

    #[test]
    fn separated_logistic_with_ridge_is_finite_and_matches_grid() {
        let xs = [-2.0, -1.0, 1.0, 2.0];
        let y = [0.0, 0.0, 1.0, 1.0];
        let x = DesignMatrix::from_columns(&[&xs], false).unwrap();
        let ridge = 1e-8;
        let fit = fit_logistic(&x, &y, ridge).unwrap();
        assert!(fit.converged);
        let beta = fit.coefficients[0];
        assert!(beta.is_finite() && beta > 0.0);

        // Grid search on the penalized objective, coarse then fine.
        let objective = |b: f64| -> f64 {
            xs.iter()
                .zip(&y)
                .map(|(&xi, &yi)| {
                    let eta = b * xi;
                    (1.0 + eta.exp()).ln() - yi * eta
                })
                .sum::<f64>()
                + 0.5 * ridge * b * b
        };
        let mut best = (0.0, f64::INFINITY);
        let mut b = 0.0;
        while b <= 40.0 {
            let v = objective(b);
            if v < best.1 {
                best = (b, v);
            }
            b += 0.01;
        }
        let mut b = best.0 - 0.01;
        let end = best.0 + 0.01;
        while b <= end {
            let v = objective(b);
            if v < best.1 {
                best = (b, v);
            }
            b += 1e-5;
        }
        assert!((beta - best.0).abs() < 1e-3, "irls {beta} grid {}", best.0);
    }

    #[test]
    fn logistic_rejects_bad_inputs() {
        let x = DesignMatrix::intercept_only(3);
        assert!(matches!(fit_logistic(&x, &[1.0, 0.0], 0.0), Err(Error::Shape(_))));
        assert!(matches!(fit_logistic(&x, &[1.0, 0.5, 0.0], 0.0), Err(Error::Domain(_))));
        let dup = DesignMatrix::from_columns(&[&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]], true).unwrap();
        assert!(matches!(
            fit_logistic(&dup, &[1.0, 0.0, 1.0], 0.0),
            Err(Error::SingularDesign)
        ));
    }

    #[test]
    fn ols_examples() {
        let x = DesignMatrix::from_columns(&[&[1.0, 2.0, 3.0]], false).unwrap();
        let fit = fit_ols(&x, &[2.0, 4.0, 6.0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        let residuals: Vec<f64> = fit
            .predict(&x)
            .unwrap()
            .iter()
            .zip([2.0, 4.0, 6.0])
            .map(|(p, y)| y - p)
            .collect();
        assert!(residuals.iter().all(|r| r.abs() < 1e-12));

        let fit = fit_ols(&DesignMatrix::intercept_only(3), &[1.0, 2.0, 3.0]).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);

        let dup = DesignMatrix::from_columns(&[&[1.0, 2.0, 4.0], &[1.0, 2.0, 4.0]], false).unwrap();
        assert!(matches!(fit_ols(&dup, &[1.0, 2.0, 3.0]), Err(Error::SingularDesign)));
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 60;
        let cols: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect())
            .collect();
        let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
        let x = DesignMatrix::from_columns(&refs, true).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|i| 1.0 + cols[0][i] - 3.0 * cols[2][i] + rng.gen::<f64>())
            .collect();
        let fit = fit_ols(&x, &y).unwrap();
        let pred = fit.predict(&x).unwrap();
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        for j in 0..x.cols() {
            assert!(dot(&resid, &x.column(j)).abs() <= 1e-8);
        }
    }

    #[test]
    fn predict_proba_examples() {
        let x = DesignMatrix::intercept_only(3);
        let fit = |b: f64| LogisticFit {
            coefficients: vec![b],
            converged: true,
            iterations: 0,
            final_deviance: 0.0,
        };
        assert!(predict_proba(&fit(0.0), &x).unwrap().iter().all(|&p| p == 0.5));
        assert!(predict_proba(&fit(40.0), &x).unwrap().iter().all(|&p| p == 1.0 - 1e-8));
        let p = predict_proba(&fit(logit(0.75)), &x).unwrap();
        assert!((p[0] - 0.75).abs() < 1e-12);
        let wide = DesignMatrix::from_columns(&[&[1.0, 2.0, 3.0]], true).unwrap();
        assert!(matches!(predict_proba(&fit(0.0), &wide), Err(Error::Shape(_))));
    }

    #[test]
    fn offset_logistic_zero_score_returns_zero() {
        // expit(0) = 0.5 matches y = 0.5 everywhere.
        let eps = fit_offset_logistic(&[0.0, 0.0], &[1.0, -3.0], &[0.5, 0.5]).unwrap();
        assert_eq!(eps, 0.0);
    }

    #[test]
    fn offset_logistic_single_observation_diverges() {
        let err = fit_offset_logistic(&[0.0], &[2.0], &[1.0]).unwrap_err();
        assert!(matches!(err, Error::Convergence { .. }));
    }

    #[test]
    fn offset_logistic_degenerate_covariate() {
        assert!(matches!(
            fit_offset_logistic(&[0.1, 0.2], &[0.0, 0.0], &[0.3, 0.9]),
            Err(Error::DegenerateCovariate)
        ));
    }

    #[test]
    fn offset_logistic_matches_grid_minimizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 80;
        let offset: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let eps = fit_offset_logistic(&offset, &h, &y).unwrap();

        let nll = |e: f64| -> f64 {
            (0..n)
                .map(|i| {
                    let p = 1.0 / (1.0 + (-(offset[i] + e * h[i])).exp());
                    -(y[i] * p.ln() + (1.0 - y[i]) * (1.0 - p).ln())
                })
                .sum()
        };
        // Coarse grid over [-5, 5], then refine to step 1e-6.
        let mut best = (-5.0, f64::INFINITY);
        let mut step = 1e-2;
        let (mut lo, mut hi) = (-5.0, 5.0);
        while step >= 1e-6 {
            let mut e = lo;
            while e <= hi {
                let v = nll(e);
                if v < best.1 {
                    best = (e, v);
                }
                e += step;
            }
            lo = best.0 - step;
            hi = best.0 + step;
            step /= 10.0;
        }
        assert!((eps - best.0).abs() < 1e-6, "solver {eps} grid {}", best.0);
    }

    proptest! {
        #[test]
        fn predicted_probabilities_stay_clamped(b in -60.0f64..60.0, xs in prop::collection::vec(-5.0f64..5.0, 1..20)) {
            let x = DesignMatrix::from_columns(&[&xs], false).unwrap();
            let fit = LogisticFit { coefficients: vec![b], converged: true, iterations: 0, final_deviance: 0.0 };
            for p in predict_proba(&fit, &x).unwrap() {
                prop_assert!((PROBABILITY_FLOOR..=1.0 - PROBABILITY_FLOOR).contains(&p));
            }
        }

        #[test]
        fn offset_logistic_solves_score(
            seed in any::<u64>(),
            n in 5usize..60,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let offset: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 6.0 - 3.0).collect();
            let h: Vec<f64> = (0..n).map(|_| {
                let s: f64 = rng.gen::<f64>() * 0.98 + 0.01;
                if rng.gen::<bool>() { 1.0 / s } else { -1.0 / (1.0 - s) }
            }).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            if let Ok(eps) = fit_offset_logistic(&offset, &h, &y) {
                let (score, _) = offset_score(&offset, &h, &y, eps);
                prop_assert!(score.abs() <= 1e-8 * n as f64);
            }
        }

        #[test]
        fn irls_deviance_not_above_null(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 40;
            let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
            let y: Vec<f64> = xs.iter().map(|&x| if rng.gen::<f64>() < expit(1.5 * x) { 1.0 } else { 0.0 }).collect();
            let x = DesignMatrix::from_columns(&[&xs], true).unwrap();
            let fit = fit_logistic(&x, &y, 1e-8).unwrap();
            let null = 2.0 * n as f64 * std::f64::consts::LN_2;
            prop_assert!(fit.final_deviance <= null + 1e-9);
        }
    }
}
