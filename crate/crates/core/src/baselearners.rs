//! Ridge-penalized least-squares base-learners over single columns, group
//! blocks, and pairwise interaction columns.
//!
//! Every learner's penalty is calibrated so its effective degrees of
//! freedom, `df(λ) = trace(X_B (X_BᵀX_B + λI)⁻¹ X_Bᵀ)`, hits a prescribed
//! target. Equalized df is what makes the boosting selection step a fair
//! competition between one-column learners and whole-group learners.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::dataset::{ColumnMeta, DesignMatrix, GroupMap};
use crate::error::{Error, Result};
use crate::linalg;

/// How one feature column is derived from the encoded design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FeatureSpec {
    /// Design column `i` as-is.
    Column(usize),
    /// Element-wise product of raw design columns `a` and `b`.
    Product(usize, usize),
}

/// Centered feature columns the learners fit on.
///
/// Design columns always come first, in design order, so design column
/// indices (and hence group maps) remain valid feature indices. Product
/// features, when present, follow. `means` holds the raw-feature means the
/// columns were centered by; applying the same means to new raw data
/// reproduces the training feature space.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub means: Array1<f64>,
    pub specs: Vec<FeatureSpec>,
    pub labels: Vec<String>,
    pub meta: Vec<ColumnMeta>,
}

impl FeatureMatrix {
    /// Features = the design columns themselves.
    pub fn from_design(design: &DesignMatrix) -> Self {
        FeatureMatrix {
            values: design.centered.clone(),
            means: design.means.clone(),
            specs: (0..design.p()).map(FeatureSpec::Column).collect(),
            labels: design.meta.iter().map(|m| m.label.clone()).collect(),
            meta: design.meta.clone(),
        }
    }

    /// Features = design columns plus one centered product column per
    /// unordered pair of columns from distinct source variables.
    pub fn with_interactions(design: &DesignMatrix) -> Self {
        let mut fm = Self::from_design(design);
        let n = design.n();
        let p = design.p();
        let mut products = Vec::new();
        for a in 0..p {
            for b in (a + 1)..p {
                if design.meta[a].variable == design.meta[b].variable {
                    continue;
                }
                products.push((a, b));
            }
        }
        let mut values = Array2::zeros((n, p + products.len()));
        values
            .slice_mut(ndarray::s![.., ..p])
            .assign(&fm.values);
        let mut means = Array1::zeros(p + products.len());
        means.slice_mut(ndarray::s![..p]).assign(&fm.means);
        for (k, &(a, b)) in products.iter().enumerate() {
            let prod = &design.raw.column(a) * &design.raw.column(b);
            let mean = prod.sum() / n as f64;
            values
                .column_mut(p + k)
                .assign(&prod.mapv(|v| v - mean));
            means[p + k] = mean;
            fm.specs.push(FeatureSpec::Product(a, b));
            fm.labels
                .push(format!("{} × {}", design.meta[a].label, design.meta[b].label));
        }
        fm.values = values;
        fm.means = means;
        fm
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn q(&self) -> usize {
        self.values.ncols()
    }

    /// Row subset with feature definitions (specs, means) unchanged; used
    /// for cross-validation folds.
    pub fn subset_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            values: self.values.select(Axis(0), rows),
            means: self.means.clone(),
            specs: self.specs.clone(),
            labels: self.labels.clone(),
            meta: self.meta.clone(),
        }
    }
}

/// What a base-learner ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum LearnerKind {
    Individual,
    Group,
    Interaction,
}

/// One ridge base-learner: a column subset, its calibrated penalty, and the
/// df target the penalty realizes.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BaseLearner {
    pub id: usize,
    pub kind: LearnerKind,
    /// Feature indices this learner fits on.
    pub columns: Vec<usize>,
    pub lambda: f64,
    pub df_target: f64,
    pub label: String,
}

fn gram(block: &ArrayView2<f64>) -> Array2<f64> {
    block.t().dot(block)
}

fn eigen_rank(eigenvalues: &[f64]) -> (usize, f64) {
    let max = eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let tol = max * 1e-10;
    let rank = eigenvalues.iter().filter(|&&e| e > tol).count();
    (rank, tol)
}

fn df_at(eigenvalues: &[f64], tol: f64, lambda: f64) -> f64 {
    eigenvalues
        .iter()
        .filter(|&&e| e > tol)
        .map(|&e| e / (e + lambda))
        .sum()
}

/// Find the ridge penalty realizing `df_target` effective degrees of
/// freedom on `block`.
///
/// `df(λ)` is strictly decreasing, so the root is unique; it is bracketed by
/// geometric growth and then bisected to an absolute df tolerance of 1e-10.
pub fn solve_ridge_lambda(block: ArrayView2<f64>, df_target: f64) -> Result<f64> {
    let eig = linalg::symmetric_eigenvalues(&gram(&block).view());
    solve_ridge_lambda_from_eigen(&eig, df_target)
}

/// As [`solve_ridge_lambda`], starting from precomputed Gram eigenvalues.
pub fn solve_ridge_lambda_from_eigen(eigenvalues: &[f64], df_target: f64) -> Result<f64> {
    let (rank, tol) = eigen_rank(eigenvalues);
    if !(df_target > 0.0) {
        return Err(Error::Calibration(format!(
            "df target must be positive, got {df_target}"
        )));
    }
    if df_target > rank as f64 + 1e-8 {
        return Err(Error::Calibration(format!(
            "df target {df_target} exceeds block rank {rank}"
        )));
    }
    if (df_target - rank as f64).abs() <= 1e-8 {
        return Ok(0.0);
    }

    let mut hi = 1.0_f64;
    while df_at(eigenvalues, tol, hi) > df_target {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Calibration(
                "failed to bracket the ridge penalty".into(),
            ));
        }
    }
    let mut lo = 0.0_f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let df = df_at(eigenvalues, tol, mid);
        if (df - df_target).abs() <= 1e-10 {
            return Ok(mid);
        }
        if df > df_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Calibration(format!(
        "ridge penalty bisection did not reach df {df_target} within 200 iterations"
    )))
}

/// Ridge least-squares fit of one learner to `target`.
///
/// Returns the coefficient vector and the residual sum of squares; the
/// latter never exceeds `‖target‖²`.
pub fn fit_block(
    learner: &BaseLearner,
    features: &FeatureMatrix,
    target: &ArrayView1<f64>,
) -> Result<(Array1<f64>, f64)> {
    let block = features.values.select(Axis(1), &learner.columns);
    let mut g = gram(&block.view());
    for i in 0..g.nrows() {
        g[[i, i]] += learner.lambda;
    }
    let chol = linalg::cholesky(&g.view()).ok_or_else(|| {
        Error::LinearAlgebra(format!(
            "singular normal equations for learner '{}'",
            learner.label
        ))
    })?;
    let b = block.t().dot(target);
    let coef = linalg::cholesky_solve(&chol.view(), &b.view());
    let tt = target.dot(target);
    let sse = ridge_sse(tt, &b.view(), &coef.view(), learner.lambda);
    Ok((coef, sse))
}

/// `‖t − Xc‖²` evaluated without forming the residual, using
/// `(G + λI)c = b`: sse = t·t − c·b − λ‖c‖².
fn ridge_sse(tt: f64, b: &ArrayView1<f64>, coef: &ArrayView1<f64>, lambda: f64) -> f64 {
    let fitted = coef.dot(b) + lambda * coef.dot(coef);
    (tt - fitted).min(tt)
}

/// One individual learner per design column (df α) plus one learner per
/// group (df 1−α). Learners whose df target is zero are omitted, as are
/// learners over zero-variance blocks.
pub fn build_learners(
    features: &FeatureMatrix,
    groups: &GroupMap,
    alpha: f64,
) -> Result<Vec<BaseLearner>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let mut learners = Vec::new();
    if alpha > 0.0 {
        for (idx, spec) in features.specs.iter().enumerate() {
            if !matches!(spec, FeatureSpec::Column(_)) {
                continue;
            }
            if let Some(l) = calibrated(
                features,
                LearnerKind::Individual,
                vec![idx],
                alpha,
                features.labels[idx].clone(),
            )? {
                learners.push(l);
            }
        }
    }
    if alpha < 1.0 {
        for (label, columns) in &groups.groups {
            if let Some(l) = calibrated(
                features,
                LearnerKind::Group,
                columns.clone(),
                1.0 - alpha,
                label.clone(),
            )? {
                learners.push(l);
            }
        }
    }
    for (id, l) in learners.iter_mut().enumerate() {
        l.id = id;
    }
    Ok(learners)
}

/// One learner per product feature, penalized like an individual learner.
/// The returned ids continue from `0`; callers composing learner lists
/// renumber afterwards.
pub fn build_interactions(features: &FeatureMatrix, alpha: f64) -> Result<Vec<BaseLearner>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    let mut learners = Vec::new();
    if alpha > 0.0 {
        for (idx, spec) in features.specs.iter().enumerate() {
            if !matches!(spec, FeatureSpec::Product(_, _)) {
                continue;
            }
            if let Some(l) = calibrated(
                features,
                LearnerKind::Interaction,
                vec![idx],
                alpha,
                features.labels[idx].clone(),
            )? {
                learners.push(l);
            }
        }
    }
    for (id, l) in learners.iter_mut().enumerate() {
        l.id = id;
    }
    Ok(learners)
}

/// Calibrate one learner's penalty, capping the df target at the block's
/// numerical rank; returns `None` when the block has no flexibility at all.
fn calibrated(
    features: &FeatureMatrix,
    kind: LearnerKind,
    columns: Vec<usize>,
    df_target: f64,
    label: String,
) -> Result<Option<BaseLearner>> {
    let block = features.values.select(Axis(1), &columns);
    let eig = linalg::symmetric_eigenvalues(&gram(&block.view()).view());
    let (rank, _) = eigen_rank(&eig);
    if rank == 0 {
        eprintln!("warning: learner '{label}' spans only zero-variance columns; omitted");
        return Ok(None);
    }
    let mut df = df_target;
    if df > rank as f64 {
        eprintln!(
            "warning: learner '{label}' df target {df_target} capped at numerical rank {rank}"
        );
        df = rank as f64;
    }
    let lambda = solve_ridge_lambda_from_eigen(&eig, df)?;
    Ok(Some(BaseLearner {
        id: 0,
        kind,
        columns,
        lambda,
        df_target: df,
        label,
    }))
}

enum Factor {
    Single { col: usize, s_plus_lambda: f64 },
    Block { chol: Array2<f64> },
}

/// A learner list bound to a feature matrix, with the per-learner normal
/// equations factorized once so repeated fits cost `O(k²)` each (`O(1)` for
/// single columns) given the precomputed projections `Xᵀr`.
pub struct LearnerSet {
    features: FeatureMatrix,
    learners: Vec<BaseLearner>,
    factors: Vec<Factor>,
}

impl LearnerSet {
    pub fn new(features: FeatureMatrix, learners: Vec<BaseLearner>) -> Result<Self> {
        if learners.is_empty() {
            return Err(Error::Config("empty base-learner list".into()));
        }
        for (i, l) in learners.iter().enumerate() {
            assert_eq!(l.id, i, "learner ids must equal their positions");
        }
        let factors = learners
            .iter()
            .map(|l| {
                if let [col] = l.columns[..] {
                    let v = features.values.column(col);
                    Ok(Factor::Single {
                        col,
                        s_plus_lambda: v.dot(&v) + l.lambda,
                    })
                } else {
                    let block = features.values.select(Axis(1), &l.columns);
                    let mut g = gram(&block.view());
                    for i in 0..g.nrows() {
                        g[[i, i]] += l.lambda;
                    }
                    let chol = linalg::cholesky(&g.view()).ok_or_else(|| {
                        Error::LinearAlgebra(format!(
                            "singular normal equations for learner '{}'",
                            l.label
                        ))
                    })?;
                    Ok(Factor::Block { chol })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LearnerSet {
            features,
            learners,
            factors,
        })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn learners(&self) -> &[BaseLearner] {
        &self.learners
    }

    /// Project a residual onto every feature column at once: `Xᵀr`.
    pub fn project(&self, residual: &ArrayView1<f64>) -> Array1<f64> {
        self.features.values.t().dot(residual)
    }

    /// Fit one learner from the precomputed projection vector.
    fn fit_from_projection(
        &self,
        idx: usize,
        projections: &Array1<f64>,
        tt: f64,
    ) -> (Array1<f64>, f64) {
        let learner = &self.learners[idx];
        match &self.factors[idx] {
            Factor::Single { col, s_plus_lambda } => {
                let b = projections[*col];
                let c = b / s_plus_lambda;
                let sse = (tt - c * b - learner.lambda * c * c).min(tt);
                (ndarray::arr1(&[c]), sse)
            }
            Factor::Block { chol } => {
                let b = Array1::from_iter(learner.columns.iter().map(|&c| projections[c]));
                let coef = linalg::cholesky_solve(&chol.view(), &b.view());
                let sse = ridge_sse(tt, &b.view(), &coef.view(), learner.lambda);
                (coef, sse)
            }
        }
    }

    /// Fit every learner to the residual and return the winner: minimal
    /// sse, ties broken toward the lowest id.
    pub fn select(&self, residual: &ArrayView1<f64>) -> (usize, Array1<f64>, f64) {
        let projections = self.project(residual);
        let tt = residual.dot(residual);
        let mut best: Option<(usize, f64)> = None;
        for idx in 0..self.learners.len() {
            let (_, sse) = self.fit_from_projection(idx, &projections, tt);
            if best.is_none_or(|(_, b)| sse < b) {
                best = Some((idx, sse));
            }
        }
        let (idx, sse) = best.expect("learner list is non-empty");
        let (coef, _) = self.fit_from_projection(idx, &projections, tt);
        (idx, coef, sse)
    }
}
