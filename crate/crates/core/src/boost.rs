//! Component-wise functional gradient boosting for the binomial deviance.
//!
//! Each iteration fits every base-learner to the current pseudo-residuals
//! `y − σ(f)`, applies the best fit scaled by the step length ν, and
//! re-optimizes the scalar offset. The stopping iteration is chosen by
//! k-fold cross-validation over held-out deviance.

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselearners::{
    build_interactions, build_learners, BaseLearner, FeatureMatrix, FeatureSpec, LearnerKind,
    LearnerSet,
};
use crate::dataset::{ColumnMeta, DesignMatrix, GroupMap};
use crate::error::{Error, Result};

/// Which base-learner set the boosting model competes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerMode {
    /// Individual learners only (plain component-wise boosting).
    Mb,
    /// Individual plus group learners (sparse group boosting).
    Sgb,
    /// Individual plus pairwise-interaction learners.
    MbInt,
}

impl std::fmt::Display for LearnerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LearnerMode::Mb => write!(f, "mb"),
            LearnerMode::Sgb => write!(f, "sgb"),
            LearnerMode::MbInt => write!(f, "mb-int"),
        }
    }
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Step length ν applied to every selected fit.
    pub nu: f64,
    /// Iteration budget; cross-validation picks a stopping point within it.
    pub mstop_max: usize,
    /// Mixing between individual (df α) and group (df 1−α) learners.
    pub alpha: f64,
    /// Cross-validation fold count.
    pub folds: usize,
    pub seed: u64,
    pub learner_mode: LearnerMode,
    /// Fixed stopping iteration; skips cross-validation when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mstop: Option<usize>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            nu: 0.3,
            mstop_max: 3000,
            alpha: 0.5,
            folds: 25,
            seed: 0,
            learner_mode: LearnerMode::Sgb,
            mstop: None,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::Config(format!(
                "nu must lie in (0, 1], got {}",
                self.nu
            )));
        }
        if self.mstop_max < 1 {
            return Err(Error::Config("mstop_max must be at least 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config(format!(
                "cross-validation needs at least 2 folds, got {}",
                self.folds
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!(
                "alpha must lie in [0, 1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// A fitted boosting model, self-contained for prediction: feature
/// definitions, centering means, and accumulated coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostModel {
    pub intercept_offset: f64,
    /// Cumulative ν-scaled coefficient per feature.
    pub coefficients: Vec<f64>,
    pub feature_specs: Vec<FeatureSpec>,
    pub feature_means: Vec<f64>,
    pub feature_labels: Vec<String>,
    /// Design columns the model expects at prediction time.
    pub column_meta: Vec<ColumnMeta>,
    pub learners: Vec<BaseLearner>,
    /// (iteration, learner id) per boosting step, 1-based iterations.
    pub selection_history: Vec<(usize, usize)>,
    /// In-sample deviance decrease attributed to each learner.
    pub risk_reduction: Vec<f64>,
    pub selection_count: Vec<usize>,
    /// In-sample deviance after 0, 1, …, mstop iterations.
    pub train_deviance: Vec<f64>,
    pub mstop_used: usize,
    pub config: FitConfig,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// log(1 + eˣ) without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Binomial deviance −2·loglik of scores `f` against labels `y`.
pub fn binomial_deviance(y: &[u8], f: &ArrayView1<f64>) -> f64 {
    assert_eq!(y.len(), f.len());
    2.0 * y
        .iter()
        .zip(f)
        .map(|(&yi, &fi)| softplus(fi) - yi as f64 * fi)
        .sum::<f64>()
}

/// Pseudo-residuals of the logistic loss: `y − σ(f)`.
pub fn negative_gradient(y: &[u8], f: &ArrayView1<f64>) -> Array1<f64> {
    assert_eq!(y.len(), f.len());
    Array1::from_iter(y.iter().zip(f).map(|(&yi, &fi)| yi as f64 - sigmoid(fi)))
}

/// Newton adjustment `δ` bringing the scalar offset of `scores` to its
/// deviance optimum: solves `Σ σ(scoresᵢ + δ) = Σ yᵢ`.
fn offset_delta(y: &[u8], scores: &ArrayView1<f64>) -> f64 {
    let target: f64 = y.iter().map(|&v| v as f64).sum();
    let mut delta = 0.0;
    for _ in 0..50 {
        let mut total = 0.0;
        let mut curvature = 0.0;
        for &s in scores {
            let p = sigmoid(s + delta);
            total += p;
            curvature += p * (1.0 - p);
        }
        let gradient = total - target;
        if gradient.abs() < 1e-12 * y.len() as f64 || curvature <= 0.0 {
            break;
        }
        let step = (gradient / curvature).clamp(-5.0, 5.0);
        delta -= step;
        if step.abs() < 1e-14 {
            break;
        }
    }
    delta
}

/// Mutable boosting state threaded through [`boost_step`].
pub struct BoostState {
    pub intercept_offset: f64,
    pub coefficients: Array1<f64>,
    pub scores: Array1<f64>,
    pub selection_history: Vec<(usize, usize)>,
    pub risk_reduction: Vec<f64>,
    pub selection_count: Vec<usize>,
    pub train_deviance: Vec<f64>,
}

impl BoostState {
    pub fn new(y: &[u8], n_features: usize, n_learners: usize) -> Result<Self> {
        let n = y.len();
        let positives = y.iter().filter(|&&v| v == 1).count();
        if positives == 0 || positives == n {
            return Err(Error::Degenerate(
                "outcome is constant; the intercept offset is infinite".into(),
            ));
        }
        let q = positives as f64 / n as f64;
        let offset = (q / (1.0 - q)).ln();
        let scores = Array1::from_elem(n, offset);
        let deviance = binomial_deviance(y, &scores.view());
        Ok(BoostState {
            intercept_offset: offset,
            coefficients: Array1::zeros(n_features),
            scores,
            selection_history: Vec::new(),
            risk_reduction: vec![0.0; n_learners],
            selection_count: vec![0; n_learners],
            train_deviance: vec![deviance],
        })
    }

    fn deviance(&self) -> f64 {
        *self.train_deviance.last().expect("initialized with m=0")
    }
}

/// What one boosting iteration changed: the ν-scaled coefficient deltas per
/// feature column and the offset adjustment.
pub struct StepUpdate {
    pub selected: usize,
    pub applied: Vec<(usize, f64)>,
    pub offset_delta: f64,
}

/// One boosting iteration: select the best learner on the current
/// pseudo-residuals, apply its ν-scaled fit, re-optimize the offset, and
/// book the risk reduction.
pub fn boost_step(state: &mut BoostState, set: &LearnerSet, y: &[u8], nu: f64) -> StepUpdate {
    let residual = negative_gradient(y, &state.scores.view());
    let (selected, coef, _) = set.select(&residual.view());
    let learner = &set.learners()[selected];

    let values = &set.features().values;
    let mut applied = Vec::with_capacity(learner.columns.len());
    for (k, &col) in learner.columns.iter().enumerate() {
        let update = nu * coef[k];
        state.coefficients[col] += update;
        state.scores.scaled_add(update, &values.column(col));
        applied.push((col, update));
    }
    let delta = offset_delta(y, &state.scores.view());
    state.intercept_offset += delta;
    state.scores += delta;

    let before = state.deviance();
    let after = binomial_deviance(y, &state.scores.view());
    let iteration = state.selection_history.len() + 1;
    state.selection_history.push((iteration, learner.id));
    state.risk_reduction[learner.id] += before - after;
    state.selection_count[learner.id] += 1;
    state.train_deviance.push(after);
    StepUpdate {
        selected,
        applied,
        offset_delta: delta,
    }
}

/// Feature matrix and learner list for one mode.
fn assemble(
    design: &DesignMatrix,
    groups: &GroupMap,
    config: &FitConfig,
) -> Result<(FeatureMatrix, Vec<BaseLearner>)> {
    let features = match config.learner_mode {
        LearnerMode::Mb | LearnerMode::Sgb => FeatureMatrix::from_design(design),
        LearnerMode::MbInt => FeatureMatrix::with_interactions(design),
    };
    let learners = assemble_learners(&features, groups, config)?;
    Ok((features, learners))
}

/// Learner list over an existing feature matrix (fold rebuilds recalibrate
/// the penalties on the fold's own rows).
fn assemble_learners(
    features: &FeatureMatrix,
    groups: &GroupMap,
    config: &FitConfig,
) -> Result<Vec<BaseLearner>> {
    match config.learner_mode {
        LearnerMode::Mb => build_learners(features, &GroupMap::empty(), config.alpha),
        LearnerMode::Sgb => build_learners(features, groups, config.alpha),
        LearnerMode::MbInt => {
            let mut learners = build_learners(features, &GroupMap::empty(), config.alpha)?;
            learners.extend(build_interactions(features, config.alpha)?);
            for (id, l) in learners.iter_mut().enumerate() {
                l.id = id;
            }
            Ok(learners)
        }
    }
}

/// Fit a boosting model, selecting the stopping iteration by
/// cross-validation unless `config.mstop` pins it.
pub fn fit_boost(design: &DesignMatrix, y: &[u8], config: &FitConfig) -> Result<BoostModel> {
    config.validate()?;
    assert_eq!(design.n(), y.len());
    let groups = GroupMap::from_meta(&design.meta);
    let (features, learners) = assemble(design, &groups, config)?;
    let mstop = match config.mstop {
        Some(m) => m.min(config.mstop_max),
        None => cv_mstop(&features, &groups, y, config)?.mstop,
    };

    let set = LearnerSet::new(features, learners)?;
    let mut state = BoostState::new(y, set.features().q(), set.learners().len())?;
    for _ in 0..mstop {
        boost_step(&mut state, &set, y, config.nu);
    }

    let features = set.features();
    Ok(BoostModel {
        intercept_offset: state.intercept_offset,
        coefficients: state.coefficients.to_vec(),
        feature_specs: features.specs.clone(),
        feature_means: features.means.to_vec(),
        feature_labels: features.labels.clone(),
        column_meta: features.meta.clone(),
        learners: set.learners().to_vec(),
        selection_history: state.selection_history,
        risk_reduction: state.risk_reduction,
        selection_count: state.selection_count,
        train_deviance: state.train_deviance,
        mstop_used: mstop,
        config: config.clone(),
    })
}

/// Cross-validation outcome: the chosen stopping iteration and the mean
/// held-out deviance after 0..=mstop_max iterations.
#[derive(Debug, Clone)]
pub struct CvResult {
    pub mstop: usize,
    pub mean_deviance: Vec<f64>,
}

/// Pick the boosting iteration minimizing mean held-out binomial deviance
/// over seed-deterministic folds; ties go to the smallest iteration.
pub fn cross_validate_mstop(design: &DesignMatrix, y: &[u8], config: &FitConfig) -> Result<usize> {
    Ok(cv_path(design, y, config)?.mstop)
}

/// Full cross-validation curve behind [`cross_validate_mstop`].
pub fn cv_path(design: &DesignMatrix, y: &[u8], config: &FitConfig) -> Result<CvResult> {
    config.validate()?;
    let groups = GroupMap::from_meta(&design.meta);
    let (features, _) = assemble(design, &groups, config)?;
    cv_mstop(&features, &groups, y, config)
}

fn cv_partition(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0usize; n];
    for (i, &row) in order.iter().enumerate() {
        assignment[row] = i % folds;
    }
    assignment
}

fn fold_trains_are_nonconstant(assignment: &[usize], folds: usize, y: &[u8]) -> bool {
    (0..folds).all(|f| {
        let mut saw = [false, false];
        for (row, &a) in assignment.iter().enumerate() {
            if a != f {
                saw[y[row] as usize] = true;
            }
        }
        saw[0] && saw[1]
    })
}

fn cv_mstop(
    features: &FeatureMatrix,
    groups: &GroupMap,
    y: &[u8],
    config: &FitConfig,
) -> Result<CvResult> {
    let n = y.len();
    if config.folds > n {
        return Err(Error::Config(format!(
            "{} folds exceed {} observations",
            config.folds, n
        )));
    }

    // one reshuffle is allowed if a fold's training side is single-class
    let mut assignment = cv_partition(n, config.folds, config.seed);
    if !fold_trains_are_nonconstant(&assignment, config.folds, y) {
        assignment = cv_partition(n, config.folds, config.seed.wrapping_add(1));
        if !fold_trains_are_nonconstant(&assignment, config.folds, y) {
            return Err(Error::Degenerate(
                "a cross-validation fold has a single-class training side even after \
                 reshuffling; reduce the fold count"
                    .into(),
            ));
        }
    }

    let mstop_max = config.mstop_max;
    let fold_paths: Vec<Vec<f64>> = (0..config.folds)
        .into_par_iter()
        .map(|fold| -> Result<Vec<f64>> {
            let train_rows: Vec<usize> = (0..n).filter(|&i| assignment[i] != fold).collect();
            let val_rows: Vec<usize> = (0..n).filter(|&i| assignment[i] == fold).collect();
            let y_train: Vec<u8> = train_rows.iter().map(|&i| y[i]).collect();
            let y_val: Vec<u8> = val_rows.iter().map(|&i| y[i]).collect();

            let fold_features = features.subset_rows(&train_rows);
            let learners = assemble_learners(&fold_features, groups, config)?;
            let set = LearnerSet::new(fold_features, learners)?;
            let mut state = BoostState::new(&y_train, set.features().q(), set.learners().len())?;

            // held-out scores tracked incrementally alongside the fit
            let mut val_scores =
                Array1::from_elem(val_rows.len(), state.intercept_offset);
            let mut path = Vec::with_capacity(mstop_max + 1);
            path.push(binomial_deviance(&y_val, &val_scores.view()));
            for _ in 0..mstop_max {
                let update = boost_step(&mut state, &set, &y_train, config.nu);
                for (v, &row) in val_rows.iter().enumerate() {
                    let mut delta = update.offset_delta;
                    for &(col, u) in &update.applied {
                        delta += u * features.values[[row, col]];
                    }
                    val_scores[v] += delta;
                }
                path.push(binomial_deviance(&y_val, &val_scores.view()));
            }
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut mean = vec![0.0; mstop_max + 1];
    for path in &fold_paths {
        for (m, v) in path.iter().enumerate() {
            mean[m] += v / config.folds as f64;
        }
    }
    let mut best = 0usize;
    for m in 1..=mstop_max {
        if mean[m] < mean[best] {
            best = m;
        }
    }
    Ok(CvResult {
        mstop: best,
        mean_deviance: mean,
    })
}

/// Predicted probabilities `σ(offset + Σ coefᵢ·featureᵢ)` on new data.
///
/// Features are reconstructed from the raw design columns and centered by
/// the training means stored in the model.
pub fn predict_proba(model: &BoostModel, design: &DesignMatrix) -> Result<Array1<f64>> {
    if design.meta.len() != model.column_meta.len()
        || design
            .meta
            .iter()
            .zip(&model.column_meta)
            .any(|(a, b)| a.label != b.label)
    {
        return Err(Error::Schema(
            "design columns do not match the model's training columns".into(),
        ));
    }
    let mut scores = Array1::from_elem(design.n(), model.intercept_offset);
    for (f, &coef) in model.coefficients.iter().enumerate() {
        if coef == 0.0 {
            continue;
        }
        let mean = model.feature_means[f];
        match model.feature_specs[f] {
            FeatureSpec::Column(c) => {
                for (i, &v) in design.raw.column(c).iter().enumerate() {
                    scores[i] += coef * (v - mean);
                }
            }
            FeatureSpec::Product(a, b) => {
                let ca = design.raw.column(a);
                let cb = design.raw.column(b);
                for i in 0..design.n() {
                    scores[i] += coef * (ca[i] * cb[i] - mean);
                }
            }
        }
    }
    Ok(scores.mapv(sigmoid))
}

/// One line of the risk-reduction importance ranking.
#[derive(Debug, Clone, Serialize)]
pub struct ImportanceRow {
    pub learner_id: usize,
    pub label: String,
    pub kind: LearnerKind,
    pub risk_reduction: f64,
    pub selection_count: usize,
}

/// Selected learners ranked by cumulative in-sample deviance reduction.
pub fn variable_importance(model: &BoostModel) -> Vec<ImportanceRow> {
    let mut rows: Vec<ImportanceRow> = model
        .learners
        .iter()
        .filter(|l| model.selection_count[l.id] > 0)
        .map(|l| ImportanceRow {
            learner_id: l.id,
            label: l.label.clone(),
            kind: l.kind,
            risk_reduction: model.risk_reduction[l.id],
            selection_count: model.selection_count[l.id],
        })
        .collect();
    rows.sort_by(|a, b| {
        b.risk_reduction
            .partial_cmp(&a.risk_reduction)
            .expect("risk reductions are finite")
            .then(a.learner_id.cmp(&b.learner_id))
    });
    rows
}

/// Sign of a group's summed log-odds contribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum GroupDirection {
    Positive,
    Negative,
    Undefined { reason: String },
}

impl std::fmt::Display for GroupDirection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupDirection::Positive => write!(f, "+"),
            GroupDirection::Negative => write!(f, "-"),
            GroupDirection::Undefined { .. } => write!(f, "undefined"),
        }
    }
}

/// Direction of one asset group's total fitted effect: the sign of the sum
/// of its columns' coefficients; undefined for groups containing nominal
/// dummies (no order to point along) and for exact zero sums.
pub fn group_direction(model: &BoostModel, group: &str) -> Result<GroupDirection> {
    let columns: Vec<usize> = model
        .column_meta
        .iter()
        .enumerate()
        .filter(|(_, m)| m.group.as_deref() == Some(group))
        .map(|(i, _)| i)
        .collect();
    if columns.is_empty() {
        return Err(Error::Lookup(format!("no columns belong to group '{group}'")));
    }
    if columns.iter().any(|&c| model.column_meta[c].level.is_some()) {
        return Ok(GroupDirection::Undefined {
            reason: "group contains non-ordinal nominal dummies".into(),
        });
    }
    let sum: f64 = model
        .feature_specs
        .iter()
        .zip(&model.coefficients)
        .filter_map(|(spec, &coef)| match spec {
            FeatureSpec::Column(c) if columns.contains(c) => Some(coef),
            _ => None,
        })
        .sum();
    Ok(if sum > 0.0 {
        GroupDirection::Positive
    } else if sum < 0.0 {
        GroupDirection::Negative
    } else {
        GroupDirection::Undefined {
            reason: "coefficients sum to exactly zero".into(),
        }
    })
}
