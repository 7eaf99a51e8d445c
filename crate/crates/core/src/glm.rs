//! Maximum-likelihood logistic regression with Wald inference, and the
//! climate-variable odds-ratio analysis built on it.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::dataset::{DesignMatrix, OutcomePair};
use crate::error::{Error, Result};
use crate::linalg;

const SCORE_TOL: f64 = 1e-8;
const MAX_ITER: usize = 50;
const WALD_Z: f64 = 1.96;

/// A fitted logistic regression. `coefficients[0]` is the intercept; the
/// remaining entries follow the predictor columns in order.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub coefficients: Array1<f64>,
    /// Inverse Fisher information at the optimum.
    pub covariance: Array2<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    pub labels: Vec<String>,
}

/// One predictor's Wald summary on the odds-ratio scale.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EffectEstimate {
    pub variable: String,
    pub odds_ratio: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn log_likelihood(x: &Array2<f64>, y: &[u8], beta: &Array1<f64>) -> f64 {
    let eta = x.dot(beta);
    eta.iter()
        .zip(y)
        .map(|(&e, &yi)| {
            // log σ(e) if y=1, log(1−σ(e)) if y=0, in a saturated-safe form
            let yf = yi as f64;
            yf * e - softplus(e)
        })
        .sum()
}

/// log(1 + eˣ) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn with_intercept(x: &ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::ones((n, x.ncols() + 1));
    out.slice_mut(ndarray::s![.., 1..]).assign(x);
    out
}

/// Fit a logistic regression of `y` on `x` (plus an intercept) by
/// iteratively reweighted least squares with step-halving.
///
/// `labels` names the predictor columns of `x`; the intercept label is
/// added internally.
pub fn fit_logistic(x: &ArrayView2<f64>, y: &[u8], labels: &[String]) -> Result<GlmFit> {
    assert_eq!(x.nrows(), y.len());
    assert_eq!(x.ncols(), labels.len());
    let n = x.nrows();
    let p = x.ncols() + 1;
    if n <= p {
        return Err(Error::Rank(format!(
            "logistic fit needs more observations than parameters (n={n}, p={p})"
        )));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::Degenerate(
            "outcome is constant; logistic likelihood is unbounded".into(),
        ));
    }

    let xmat = with_intercept(x);
    let mut beta = Array1::zeros(p);
    let mut ll = log_likelihood(&xmat, y, &beta);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        let eta = xmat.dot(&beta);
        let mu = eta.mapv(sigmoid);
        let residual =
            Array1::from_iter(y.iter().zip(mu.iter()).map(|(&yi, &m)| yi as f64 - m));
        let score = xmat.t().dot(&residual);
        if score.iter().all(|s| s.abs() < SCORE_TOL) {
            converged = true;
            break;
        }

        let weights = mu.mapv(|m| m * (1.0 - m));
        let mut weighted = xmat.clone();
        for (mut row, &w) in weighted.rows_mut().into_iter().zip(weights.iter()) {
            row.mapv_inplace(|v| v * w);
        }
        let info = xmat.t().dot(&weighted);
        let chol = linalg::cholesky(&info.view()).ok_or_else(|| {
            Error::Rank("singular Fisher information; predictors are collinear".into())
        })?;
        let mut delta = linalg::cholesky_solve(&chol.view(), &score.view());

        // step-halving keeps the log-likelihood non-decreasing (up to
        // floating-point noise in the likelihood sum)
        let ll_floor = ll - 1e-10 * (1.0 + ll.abs());
        let mut candidate = &beta + &delta;
        let mut candidate_ll = log_likelihood(&xmat, y, &candidate);
        let mut halvings = 0;
        while candidate_ll < ll_floor && halvings < 30 {
            delta *= 0.5;
            candidate = &beta + &delta;
            candidate_ll = log_likelihood(&xmat, y, &candidate);
            halvings += 1;
        }
        if candidate_ll < ll_floor {
            break;
        }

        let step = delta.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
        beta = candidate;
        ll = candidate_ll;
        if beta.iter().any(|b| b.abs() > 15.0) && step > 1e-4 {
            return Err(Error::Separation(
                "coefficients diverging (|β| > 15 with non-vanishing steps); \
                 data are likely separated"
                    .into(),
            ));
        }
    }

    // final-information covariance at the solution
    let eta = xmat.dot(&beta);
    let mu = eta.mapv(sigmoid);
    let weights = mu.mapv(|m| m * (1.0 - m));
    let mut weighted = xmat.clone();
    for (mut row, &w) in weighted.rows_mut().into_iter().zip(weights.iter()) {
        row.mapv_inplace(|v| v * w);
    }
    let info = xmat.t().dot(&weighted);
    let chol = linalg::cholesky(&info.view())
        .ok_or_else(|| Error::Rank("singular Fisher information at the optimum".into()))?;
    let covariance = linalg::cholesky_inverse(&chol.view());

    let mut all_labels = Vec::with_capacity(p);
    all_labels.push("(Intercept)".to_string());
    all_labels.extend_from_slice(labels);
    Ok(GlmFit {
        coefficients: beta,
        covariance,
        converged,
        iterations,
        log_likelihood: ll,
        labels: all_labels,
    })
}

/// Predicted probabilities σ(β₀ + xβ) on raw feature rows.
pub fn predict_proba(fit: &GlmFit, x: &ArrayView2<f64>) -> Array1<f64> {
    assert_eq!(
        x.ncols() + 1,
        fit.coefficients.len(),
        "feature count changed since fitting"
    );
    let slopes = fit.coefficients.slice(ndarray::s![1..]);
    (x.dot(&slopes) + fit.coefficients[0]).mapv(sigmoid)
}

/// Wald odds-ratio summaries for every non-intercept coefficient.
pub fn effect_table(fit: &GlmFit) -> Result<Vec<EffectEstimate>> {
    if !fit.converged {
        return Err(Error::Divergence(
            "effect table requested for a non-converged fit".into(),
        ));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let mut rows = Vec::new();
    for j in 1..fit.coefficients.len() {
        let beta = fit.coefficients[j];
        let se = fit.covariance[[j, j]].sqrt();
        let z = beta / se;
        rows.push(EffectEstimate {
            variable: fit.labels[j].clone(),
            odds_ratio: beta.exp(),
            p_value: 2.0 * (1.0 - normal.cdf(z.abs())),
            ci_low: (beta - WALD_Z * se).exp(),
            ci_high: (beta + WALD_Z * se).exp(),
        });
    }
    Ok(rows)
}

/// One row of the climate odds-ratio grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ClimateEffectRow {
    pub scope: String,
    pub target: String,
    pub block: String,
    #[serde(flatten)]
    pub estimate: EffectEstimate,
}

const CLIMATE_BLOCKS: [&str; 2] = ["climate-experience", "income-damage"];

/// Odds ratios of the eight climate variables against both outcomes.
///
/// By default each block's four predictors enter one joint model; with
/// `univariate` every predictor is fit alone (sensitivity mode).
pub fn climate_effect_analysis(
    design: &DesignMatrix,
    outcomes: &OutcomePair,
    scope_rows: &[usize],
    scope: &str,
    univariate: bool,
) -> Result<Vec<ClimateEffectRow>> {
    if scope_rows.is_empty() {
        return Err(Error::Input(format!("scope '{scope}' selects no rows")));
    }
    let mut rows = Vec::new();
    for block in CLIMATE_BLOCKS {
        let columns: Vec<usize> = design
            .meta
            .iter()
            .enumerate()
            .filter(|(_, m)| m.group.as_deref() == Some(block))
            .map(|(i, _)| i)
            .collect();
        if columns.is_empty() {
            return Err(Error::Lookup(format!(
                "design has no columns in group '{block}'"
            )));
        }
        let x_all = design.raw.select(Axis(0), scope_rows);
        for target in ["high", "low"] {
            let y: Vec<u8> = scope_rows
                .iter()
                .map(|&i| outcomes.target(target).expect("known target")[i])
                .collect();
            let column_sets: Vec<Vec<usize>> = if univariate {
                columns.iter().map(|&c| vec![c]).collect()
            } else {
                vec![columns.clone()]
            };
            for set in column_sets {
                let x = x_all.select(Axis(1), &set);
                let set_labels: Vec<String> = set
                    .iter()
                    .map(|&c| design.meta[c].label.clone())
                    .collect();
                let fit = fit_logistic(&x.view(), &y, &set_labels)?;
                for estimate in effect_table(&fit)? {
                    rows.push(ClimateEffectRow {
                        scope: scope.to_string(),
                        target: target.to_string(),
                        block: block.to_string(),
                        estimate,
                    });
                }
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// The 2×2 design: a exposed-positive, b exposed-negative, c unexposed-
    /// positive, d unexposed-negative.
    fn two_by_two(a: usize, b: usize, c: usize, d: usize) -> (Array2<f64>, Vec<u8>) {
        let n = a + b + c + d;
        let mut x = Array2::zeros((n, 1));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let exposed = i < a + b;
            x[[i, 0]] = exposed as u8 as f64;
            let positive = if exposed { i < a } else { i < a + b + c };
            y.push(positive as u8);
        }
        (x, y)
    }

    #[test]
    fn two_by_two_matches_cross_product_ratio() {
        let (x, y) = two_by_two(30, 10, 20, 40);
        let fit = fit_logistic(&x.view(), &y, &["exposure".into()]).unwrap();
        assert!(fit.converged);
        let or = fit.coefficients[1].exp();
        assert_abs_diff_eq!(or, 6.0, epsilon = 1e-6);
        // Wald se of log OR has the closed form sqrt(1/a+1/b+1/c+1/d)
        let se = fit.covariance[[1, 1]].sqrt();
        let expected = (1.0 / 30.0 + 1.0 / 10.0 + 1.0 / 20.0 + 1.0 / 40.0_f64).sqrt();
        assert_abs_diff_eq!(se, expected, epsilon = 1e-6);
    }

    #[test]
    fn intercept_only_recovers_log_odds_of_prevalence() {
        let y: Vec<u8> = (0..40).map(|i| (i < 10) as u8).collect();
        let x = Array2::zeros((40, 0));
        let fit = fit_logistic(&x.view(), &y, &[]).unwrap();
        let q = 0.25_f64;
        assert_abs_diff_eq!(fit.coefficients[0], (q / (1.0 - q)).ln(), epsilon = 1e-8);
    }

    #[test]
    fn score_equations_hold_at_the_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 120;
        let x = Array2::from_shape_fn((n, 3), |_| rng.gen_bool(0.5) as u8 as f64);
        let y: Vec<u8> = (0..n)
            .map(|i| {
                let eta = 0.8 * x[[i, 0]] - 1.1 * x[[i, 1]] + 0.3;
                rng.gen_bool(sigmoid(eta)) as u8
            })
            .collect();
        let labels: Vec<String> = (0..3).map(|j| format!("x{j}")).collect();
        let fit = fit_logistic(&x.view(), &y, &labels).unwrap();
        assert!(fit.converged);
        let xmat = with_intercept(&x.view());
        let mu = xmat.dot(&fit.coefficients).mapv(sigmoid);
        let resid = Array1::from_iter(y.iter().zip(mu.iter()).map(|(&yi, &m)| yi as f64 - m));
        let score = xmat.t().dot(&resid);
        for s in score.iter() {
            assert!(s.abs() < 1e-6, "score component {s}");
        }
    }

    #[test]
    fn beats_grid_search_on_tiny_data() {
        let x = ndarray::arr2(&[
            [0.0],
            [0.0],
            [0.0],
            [0.0],
            [1.0],
            [1.0],
            [1.0],
            [1.0],
            [1.0],
            [0.0],
        ]);
        let y = vec![0u8, 0, 1, 0, 1, 1, 0, 1, 1, 1];
        let fit = fit_logistic(&x.view(), &y, &["x".into()]).unwrap();
        let xmat = with_intercept(&x.view());
        let mut best = f64::NEG_INFINITY;
        let mut b = Array1::zeros(2);
        for i in -300..=300 {
            for j in -300..=300 {
                b[0] = i as f64 * 0.01;
                b[1] = j as f64 * 0.01;
                best = best.max(log_likelihood(&xmat, &y, &b));
            }
        }
        assert!(
            fit.log_likelihood >= best - 1e-9,
            "IRLS {} vs grid {}",
            fit.log_likelihood,
            best
        );
    }

    #[test]
    fn perfectly_separated_data_is_flagged() {
        let x = ndarray::arr2(&[
            [0.0],
            [0.0],
            [0.0],
            [0.0],
            [1.0],
            [1.0],
            [1.0],
            [1.0],
        ]);
        let y = vec![0u8, 0, 0, 0, 1, 1, 1, 1];
        let err = fit_logistic(&x.view(), &y, &["x".into()]).unwrap_err();
        assert!(matches!(err, Error::Separation(_)), "{err}");
    }

    #[test]
    fn constant_outcome_is_degenerate() {
        let x = Array2::zeros((10, 0));
        let err = fit_logistic(&x.view(), &[1u8; 10], &[]).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn effect_table_transforms_to_odds_scale() {
        let (x, y) = two_by_two(30, 10, 20, 40);
        let fit = fit_logistic(&x.view(), &y, &["exposure".into()]).unwrap();
        let table = effect_table(&fit).unwrap();
        assert_eq!(table.len(), 1);
        let row = &table[0];
        assert_eq!(row.variable, "exposure");
        assert_abs_diff_eq!(row.odds_ratio, 6.0, epsilon = 1e-6);
        assert!(row.ci_low < row.odds_ratio && row.odds_ratio < row.ci_high);
        assert!(row.p_value < 0.05);
        assert!(row.ci_low > 1.0, "significant OR>1 excludes 1 from the CI");
    }

    #[test]
    fn wald_ci_and_p_value_agree_on_random_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let a = rng.gen_range(5..40);
            let b = rng.gen_range(5..40);
            let c = rng.gen_range(5..40);
            let d = rng.gen_range(5..40);
            let (x, y) = two_by_two(a, b, c, d);
            let fit = fit_logistic(&x.view(), &y, &["exposure".into()]).unwrap();
            for row in effect_table(&fit).unwrap() {
                let excludes_one = row.ci_low > 1.0 || row.ci_high < 1.0;
                assert_eq!(
                    row.p_value < 0.05,
                    excludes_one,
                    "p={} CI=({}, {})",
                    row.p_value,
                    row.ci_low,
                    row.ci_high
                );
            }
        }
    }

    #[test]
    fn zero_coefficient_gives_unit_odds_ratio() {
        // exposure carries no information: balanced outcomes on both arms
        let (x, y) = two_by_two(20, 20, 20, 20);
        let fit = fit_logistic(&x.view(), &y, &["exposure".into()]).unwrap();
        let row = &effect_table(&fit).unwrap()[0];
        assert_abs_diff_eq!(row.odds_ratio, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(row.p_value, 1.0, epsilon = 1e-8);
    }
}
