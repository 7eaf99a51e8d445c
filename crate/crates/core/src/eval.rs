//! Classifier evaluation: ROC curves, AUC, accuracy, and the multi-model
//! comparison protocol.
//!
//! AUC is computed as the Mann-Whitney statistic P(score⁺ > score⁻) +
//! ½·P(tie) via average ranks, which coincides with the trapezoidal area
//! under the ROC curve produced by [`roc_curve`].

use crate::baselines::{fit_gbt, fit_mlp, fit_random_forest, ForestConfig, GbtConfig, MlpConfig};
use crate::boost::{fit_boost, FitConfig, LearnerMode};
use crate::dataset::{Country, DesignMatrix, OutcomePair};
use crate::error::{Error, Result};
use crate::glm;

/// One evaluated (model, target, scope) cell of the comparison table.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricsRow {
    pub model: String,
    pub target: String,
    pub scope: String,
    pub accuracy: f64,
    pub auc: f64,
}

fn check_two_classes(labels: &[u8]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(
            "labels contain a single class; ROC/AUC undefined".into(),
        ));
    }
    Ok((pos, neg))
}

/// ROC curve points `(fpr, tpr)`: one point per distinct score threshold plus
/// the (0,0) and (1,1) endpoints. Both coordinates are non-decreasing along
/// the returned curve.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<Vec<(f64, f64)>> {
    assert_eq!(scores.len(), labels.len());
    let (pos, neg) = check_two_classes(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = Vec::with_capacity(scores.len() + 2);
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut prev = f64::INFINITY;
    for &i in &order {
        if scores[i] != prev {
            if tp + fp > 0 {
                points.push((fp as f64 / neg as f64, tp as f64 / pos as f64));
            }
            prev = scores[i];
        }
        if labels[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    points.push((1.0, 1.0));
    Ok(points)
}

/// Mann-Whitney AUC: the probability a random positive outscores a random
/// negative, counting ties as one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len());
    let (pos, neg) = check_two_classes(labels)?;
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // average ranks over tie groups (1-based)
    let mut rank_sum_pos = 0.0_f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Area under a piecewise-linear curve by the trapezoid rule.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Fraction of observations where `(score >= threshold)` matches the label.
pub fn accuracy(scores: &[f64], labels: &[u8], threshold: f64) -> f64 {
    assert_eq!(scores.len(), labels.len());
    if labels.is_empty() {
        return 0.0;
    }
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &y)| (s >= threshold) as u8 == y)
        .count();
    correct as f64 / labels.len() as f64
}

/// Encoded rows with their outcomes and per-row country tags; the unit the
/// comparison protocol subsets by scope.
#[derive(Debug, Clone)]
pub struct ScopedData {
    pub design: DesignMatrix,
    pub outcomes: OutcomePair,
    pub countries: Vec<Country>,
}

impl ScopedData {
    pub fn new(
        design: DesignMatrix,
        outcomes: OutcomePair,
        countries: Vec<Country>,
    ) -> Result<Self> {
        if design.n() != outcomes.n() || design.n() != countries.len() {
            return Err(Error::Input(format!(
                "design ({} rows), outcomes ({}), and country tags ({}) disagree",
                design.n(),
                outcomes.n(),
                countries.len()
            )));
        }
        Ok(ScopedData {
            design,
            outcomes,
            countries,
        })
    }

    pub fn rows_in(&self, scope: Country) -> Vec<usize> {
        self.countries
            .iter()
            .enumerate()
            .filter(|&(_, &c)| scope == Country::Both || c == scope)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn subset(&self, rows: &[usize]) -> ScopedData {
        ScopedData {
            design: self.design.subset_rows(rows),
            outcomes: self.outcomes.subset(rows),
            countries: rows.iter().map(|&i| self.countries[i]).collect(),
        }
    }
}

/// Hyperparameters of the seven compared models.
#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub fit: FitConfig,
    pub forest: ForestConfig,
    pub gbt: GbtConfig,
    pub mlp: MlpConfig,
    pub scopes: Vec<Country>,
    pub threshold: f64,
    /// Run the interaction model outside the combined scope too.
    pub interactions_all_scopes: bool,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            fit: FitConfig::default(),
            forest: ForestConfig::default(),
            gbt: GbtConfig::default(),
            mlp: MlpConfig::default(),
            scopes: vec![Country::Both, Country::Chile, Country::Tunisia],
            threshold: 0.5,
            interactions_all_scopes: false,
        }
    }
}

/// Test-set scores behind one comparison row, kept for ROC emission.
#[derive(Debug, Clone)]
pub struct ModelScores {
    pub model: String,
    pub target: String,
    pub scope: String,
    pub scores: Vec<f64>,
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub rows: Vec<MetricsRow>,
    pub scores: Vec<ModelScores>,
}

const TARGETS: [&str; 2] = ["high", "low"];

/// Table 1 protocol: for every (scope, target), fit glm, mb, sgb, mb-int
/// (combined scope only unless configured otherwise), rf, gbm, and nn on
/// the training rows of that scope and score the matching test rows.
pub fn comparison_table(
    train: &ScopedData,
    test: &ScopedData,
    cfg: &ComparisonConfig,
) -> Result<Vec<MetricsRow>> {
    Ok(comparison_scores(train, test, cfg)?.rows)
}

/// [`comparison_table`] plus the per-model test scores (for ROC files).
pub fn comparison_scores(
    train: &ScopedData,
    test: &ScopedData,
    cfg: &ComparisonConfig,
) -> Result<Comparison> {
    if train.design.meta.len() != test.design.meta.len()
        || train
            .design
            .meta
            .iter()
            .zip(&test.design.meta)
            .any(|(a, b)| a.label != b.label)
    {
        return Err(Error::Schema(
            "train and test designs carry different columns".into(),
        ));
    }

    let mut rows = Vec::new();
    let mut scores_out = Vec::new();
    for &scope in &cfg.scopes {
        let tr = train.subset(&train.rows_in(scope));
        let te = test.subset(&test.rows_in(scope));
        if tr.design.n() == 0 || te.design.n() == 0 {
            return Err(Error::Input(format!(
                "scope {scope} has no training or test rows"
            )));
        }
        for target in TARGETS {
            let y_tr = tr.outcomes.target(target)?.to_vec();
            let y_te = te.outcomes.target(target)?.to_vec();
            for model in model_list(scope, cfg.interactions_all_scopes) {
                let scores = model_run(model, &tr, &te, &y_tr, cfg)?;
                rows.push(MetricsRow {
                    model: model.to_string(),
                    target: target.to_string(),
                    scope: scope.to_string(),
                    accuracy: accuracy(&scores, &y_te, cfg.threshold),
                    auc: auc(&scores, &y_te)?,
                });
                scores_out.push(ModelScores {
                    model: model.to_string(),
                    target: target.to_string(),
                    scope: scope.to_string(),
                    scores,
                    labels: y_te.clone(),
                });
            }
        }
    }
    Ok(Comparison {
        rows,
        scores: scores_out,
    })
}

fn model_list(scope: Country, interactions_all_scopes: bool) -> Vec<&'static str> {
    let mut models = vec!["glm", "mb", "sgb"];
    if scope == Country::Both || interactions_all_scopes {
        models.push("mb-int");
    }
    models.extend(["rf", "gbm", "nn"]);
    models
}

fn model_run(
    model: &str,
    tr: &ScopedData,
    te: &ScopedData,
    y_tr: &[u8],
    cfg: &ComparisonConfig,
) -> Result<Vec<f64>> {
    let boost_with = |mode: LearnerMode| -> Result<Vec<f64>> {
        let fit_cfg = FitConfig {
            learner_mode: mode,
            ..cfg.fit.clone()
        };
        let fitted = fit_boost(&tr.design, y_tr, &fit_cfg)?;
        Ok(crate::boost::predict_proba(&fitted, &te.design)?.to_vec())
    };
    match model {
        "glm" => {
            // Columns constant on the training scope (a country dummy inside
            // a one-country scope, say) would make the information matrix
            // singular; the GLM simply cannot carry them.
            let keep: Vec<usize> = (0..tr.design.p())
                .filter(|&j| {
                    let col = tr.design.raw_column(j);
                    col.iter().any(|&v| v != col[0])
                })
                .collect();
            let labels: Vec<String> = keep
                .iter()
                .map(|&j| tr.design.meta[j].label.clone())
                .collect();
            let x_tr = tr.design.raw.select(ndarray::Axis(1), &keep);
            let x_te = te.design.raw.select(ndarray::Axis(1), &keep);
            let fit = glm::fit_logistic(&x_tr.view(), y_tr, &labels)?;
            Ok(glm::predict_proba(&fit, &x_te.view()).to_vec())
        }
        "mb" => boost_with(LearnerMode::Mb),
        "sgb" => boost_with(LearnerMode::Sgb),
        "mb-int" => boost_with(LearnerMode::MbInt),
        "rf" => {
            let fitted = fit_random_forest(&tr.design, y_tr, &cfg.forest)?;
            Ok(fitted.predict(&te.design).to_vec())
        }
        "gbm" => {
            let fitted = fit_gbt(&tr.design, y_tr, &cfg.gbt)?;
            Ok(fitted.predict(&te.design).to_vec())
        }
        "nn" => {
            let fitted = fit_mlp(&tr.design, y_tr, &cfg.mlp)?;
            Ok(fitted.predict(&te.design).to_vec())
        }
        other => Err(Error::Config(format!("unknown model '{other}'"))),
    }
}
