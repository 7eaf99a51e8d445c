use ndarray::{Array1, ArrayView2};

use super::{Node, SplitScan, Tree};
use crate::boost::{binomial_deviance, sigmoid};
use crate::dataset::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub trees: usize,
    /// Maximum interaction depth per tree.
    pub depth: usize,
    pub shrinkage: f64,
    pub seed: u64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            trees: 100,
            depth: 3,
            shrinkage: 0.1,
            seed: 0,
        }
    }
}

/// Gradient-boosted trees for the binomial deviance. Leaf values are
/// Newton steps Σ(y−p)/Σp(1−p), stored with the shrinkage (and any
/// monotonicity backoff) already folded in, so prediction is
/// σ(f₀ + Σ treeₖ(x)).
#[derive(Debug, Clone)]
pub struct GbtModel {
    f0: f64,
    trees: Vec<Tree>,
    pub train_deviance: Vec<f64>,
    p: usize,
}

impl GbtModel {
    pub fn predict(&self, design: &DesignMatrix) -> Array1<f64> {
        assert_eq!(design.p(), self.p, "feature count changed since training");
        let mut scores = Array1::from_elem(design.n(), self.f0);
        for (i, score) in scores.iter_mut().enumerate() {
            let row = design.raw.row(i);
            for tree in &self.trees {
                *score += tree.predict_row(&row);
            }
        }
        scores.mapv(sigmoid)
    }
}

fn leaf_value(residual: &[f64], weight: &[f64], rows: &[usize]) -> f64 {
    let num: f64 = rows.iter().map(|&r| residual[r]).sum();
    let den: f64 = rows.iter().map(|&r| weight[r]).sum();
    if den < 1e-12 {
        0.0
    } else {
        num / den
    }
}

fn sse(sum: f64, sumsq: f64, n: usize) -> f64 {
    sumsq - sum * sum / n as f64
}

fn grow(
    nodes: &mut Vec<Node>,
    x: &ArrayView2<f64>,
    residual: &[f64],
    weight: &[f64],
    rows: &[usize],
    depth_left: usize,
) -> usize {
    let k = rows.len();
    let sum: f64 = rows.iter().map(|&r| residual[r]).sum();
    let sumsq: f64 = rows.iter().map(|&r| residual[r] * residual[r]).sum();
    let parent = sse(sum, sumsq, k);

    let mut best: Option<(f64, usize, f64)> = None;
    if depth_left > 0 && k > 1 {
        for f in 0..x.ncols() {
            let vals: Vec<f64> = rows.iter().map(|&r| x[[r, f]]).collect();
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).expect("finite features"));
            let mut pre_r = vec![0.0; k + 1];
            let mut pre_rr = vec![0.0; k + 1];
            for (i, &o) in order.iter().enumerate() {
                let r = residual[rows[o]];
                pre_r[i + 1] = pre_r[i] + r;
                pre_rr[i + 1] = pre_rr[i] + r * r;
            }
            let scan = SplitScan {
                values: &vals,
                order: &order,
            };
            let found = scan.best(|nl| {
                parent
                    - sse(pre_r[nl], pre_rr[nl], nl)
                    - sse(sum - pre_r[nl], sumsq - pre_rr[nl], k - nl)
            });
            if let Some((thr, gain)) = found {
                if best.map_or(true, |(bg, _, _)| gain > bg) {
                    best = Some((gain, f, thr));
                }
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        nodes.push(Node::Leaf {
            value: leaf_value(residual, weight, rows),
        });
        return nodes.len() - 1;
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&r| x[[r, feature]] <= threshold);
    let at = nodes.len();
    nodes.push(Node::Leaf { value: f64::NAN });
    let left = grow(nodes, x, residual, weight, &left_rows, depth_left - 1);
    let right = grow(nodes, x, residual, weight, &right_rows, depth_left - 1);
    nodes[at] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    at
}

fn scale_leaves(tree: &mut Tree, factor: f64) {
    for node in &mut tree.nodes {
        if let Node::Leaf { value } = node {
            *value *= factor;
        }
    }
}

/// Stagewise regression trees on logistic pseudo-residuals. Fully
/// deterministic: no subsampling, exhaustive split search, ties toward the
/// lowest feature index and threshold. A stage whose shrunk Newton step
/// would raise the training deviance is geometrically backed off.
pub fn fit_gbt(design: &DesignMatrix, y: &[u8], cfg: &GbtConfig) -> Result<GbtModel> {
    let n = design.n();
    assert_eq!(n, y.len());
    if cfg.depth < 1 {
        return Err(Error::Config("depth must be at least 1".into()));
    }
    if !(cfg.shrinkage >= 0.0 && cfg.shrinkage.is_finite()) {
        return Err(Error::Config(format!(
            "shrinkage must be a finite non-negative real, got {}",
            cfg.shrinkage
        )));
    }
    let positives = y.iter().filter(|&&v| v == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::Degenerate(
            "outcome is constant; the log-odds base score is infinite".into(),
        ));
    }

    let q = positives as f64 / n as f64;
    let f0 = (q / (1.0 - q)).ln();
    let x = design.raw.view();
    let mut scores = Array1::from_elem(n, f0);
    let mut train_deviance = vec![binomial_deviance(y, &scores.view())];
    let mut trees = Vec::with_capacity(cfg.trees);

    for _ in 0..cfg.trees {
        let mut residual = vec![0.0; n];
        let mut weight = vec![0.0; n];
        for i in 0..n {
            let p = sigmoid(scores[i]);
            residual[i] = y[i] as f64 - p;
            weight[i] = p * (1.0 - p);
        }
        let rows: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::new();
        grow(&mut nodes, &x, &residual, &weight, &rows, cfg.depth);
        let mut tree = Tree { nodes };
        scale_leaves(&mut tree, cfg.shrinkage);

        let before = *train_deviance.last().expect("seeded with f0 deviance");
        let mut step: Array1<f64> =
            Array1::from_iter((0..n).map(|i| tree.predict_row(&design.raw.row(i))));
        let mut factor = 1.0;
        let mut after = binomial_deviance(y, &(&scores + &step).view());
        let mut halvings = 0;
        while after > before && halvings < 30 {
            factor *= 0.5;
            step *= 0.5;
            after = binomial_deviance(y, &(&scores + &step).view());
            halvings += 1;
        }
        if after > before {
            factor = 0.0;
            step.fill(0.0);
            after = before;
        }
        if factor != 1.0 {
            scale_leaves(&mut tree, factor);
        }
        scores += &step;
        train_deviance.push(after);
        trees.push(tree);
    }

    Ok(GbtModel {
        f0,
        trees,
        train_deviance,
        p: design.p(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boost::{fit_boost, predict_proba, FitConfig, LearnerMode};
    use crate::dataset::ColumnMeta;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn meta_for(p: usize) -> Vec<ColumnMeta> {
        (0..p)
            .map(|j| ColumnMeta {
                variable: format!("v{j}"),
                level: None,
                group: None,
                label: format!("v{j}"),
            })
            .collect()
    }

    #[test]
    fn zero_shrinkage_predicts_the_base_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw = Array2::from_shape_fn((50, 3), |_| rng.gen_range(0..4) as f64);
        let design = DesignMatrix::from_raw(raw, meta_for(3));
        let y: Vec<u8> = (0..50).map(|i| (i < 20) as u8).collect();
        let cfg = GbtConfig {
            shrinkage: 0.0,
            ..GbtConfig::default()
        };
        let model = fit_gbt(&design, &y, &cfg).unwrap();
        for &p in model.predict(&design).iter() {
            assert_abs_diff_eq!(p, 0.4, epsilon = 1e-12);
        }
    }

    #[test]
    fn train_deviance_never_rises() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let raw = Array2::from_shape_fn((150, 5), |_| rng.gen_range(0..3) as f64);
        let design = DesignMatrix::from_raw(raw, meta_for(5));
        let y: Vec<u8> = (0..150)
            .map(|i| rng.gen_bool(if design.raw[[i, 1]] > 1.0 { 0.75 } else { 0.3 }) as u8)
            .collect();
        let model = fit_gbt(&design, &y, &GbtConfig::default()).unwrap();
        assert_eq!(model.train_deviance.len(), 101);
        for w in model.train_deviance.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
    }

    #[test]
    fn trees_respect_the_depth_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let raw = Array2::from_shape_fn((120, 6), |_| rng.gen_range(0..5) as f64);
        let design = DesignMatrix::from_raw(raw, meta_for(6));
        let y: Vec<u8> = (0..120).map(|_| rng.gen_bool(0.5) as u8).collect();
        let cfg = GbtConfig {
            trees: 20,
            depth: 2,
            ..GbtConfig::default()
        };
        let model = fit_gbt(&design, &y, &cfg).unwrap();
        for tree in &model.trees {
            assert!(tree.depth() <= 2);
        }
    }

    #[test]
    fn stumps_on_one_binary_feature_match_component_boosting() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let raw = Array2::from_shape_fn((160, 1), |_| rng.gen_bool(0.5) as u8 as f64);
        let design = DesignMatrix::from_raw(raw, meta_for(1));
        let y: Vec<u8> = (0..160)
            .map(|i| rng.gen_bool(if design.raw[[i, 0]] > 0.5 { 0.7 } else { 0.35 }) as u8)
            .collect();

        let gbt = fit_gbt(
            &design,
            &y,
            &GbtConfig {
                trees: 2000,
                depth: 1,
                shrinkage: 0.1,
                seed: 0,
            },
        )
        .unwrap();
        let boost = fit_boost(
            &design,
            &y,
            &FitConfig {
                nu: 0.1,
                alpha: 1.0,
                learner_mode: LearnerMode::Mb,
                mstop: Some(8000),
                mstop_max: 8000,
                ..FitConfig::default()
            },
        )
        .unwrap();

        let pg = gbt.predict(&design);
        let pb = predict_proba(&boost, &design).unwrap();
        for i in 0..design.n() {
            assert_abs_diff_eq!(pg[i], pb[i], epsilon = 1e-3);
        }
    }

    #[test]
    fn constant_outcome_is_degenerate() {
        let raw = Array2::zeros((10, 2));
        let design = DesignMatrix::from_raw(raw, meta_for(2));
        let err = fit_gbt(&design, &[1u8; 10], &GbtConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn zero_depth_is_a_config_error() {
        let raw = Array2::zeros((10, 2));
        let design = DesignMatrix::from_raw(raw, meta_for(2));
        let y: Vec<u8> = (0..10).map(|i| (i % 2) as u8).collect();
        let cfg = GbtConfig {
            depth: 0,
            ..GbtConfig::default()
        };
        assert!(matches!(
            fit_gbt(&design, &y, &cfg).unwrap_err(),
            Error::Config(_)
        ));
    }
}
