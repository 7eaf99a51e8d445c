use ndarray::{Array1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Node, SplitScan, Tree};
use crate::dataset::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub ntree: usize,
    /// Features drawn per split.
    pub mtry: usize,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            ntree: 500,
            mtry: 7,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ForestModel {
    trees: Vec<Tree>,
    oob: Vec<Option<f64>>,
    p: usize,
}

impl ForestModel {
    /// Fraction of trees voting class 1 per row.
    pub fn predict(&self, design: &DesignMatrix) -> Array1<f64> {
        assert_eq!(design.p(), self.p, "feature count changed since training");
        let mut scores = Array1::zeros(design.n());
        for (i, score) in scores.iter_mut().enumerate() {
            let row = design.raw.row(i);
            let votes: f64 = self.trees.iter().map(|t| t.predict_row(&row)).sum();
            *score = votes / self.trees.len() as f64;
        }
        scores
    }

    /// Out-of-bag vote fraction per training row; `None` when a row landed
    /// in every bootstrap sample.
    pub fn oob_scores(&self) -> &[Option<f64>] {
        &self.oob
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    let q = pos as f64 / n as f64;
    2.0 * q * (1.0 - q)
}

fn majority(pos: usize, n: usize) -> f64 {
    (2 * pos > n) as u8 as f64
}

fn grow(
    nodes: &mut Vec<Node>,
    x: &ArrayView2<f64>,
    y: &[u8],
    rows: &[usize],
    mtry: usize,
    rng: &mut ChaCha8Rng,
) -> usize {
    let k = rows.len();
    let pos = rows.iter().filter(|&&r| y[r] == 1).count();
    if pos == 0 || pos == k {
        nodes.push(Node::Leaf {
            value: (pos > 0) as u8 as f64,
        });
        return nodes.len() - 1;
    }

    let mut features = rand::seq::index::sample(rng, x.ncols(), mtry).into_vec();
    features.sort_unstable();

    let parent = gini(pos, k);
    let mut best: Option<(f64, usize, f64)> = None;
    for &f in &features {
        let vals: Vec<f64> = rows.iter().map(|&r| x[[r, f]]).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).expect("finite features"));
        let mut prefix = vec![0usize; k + 1];
        for (i, &o) in order.iter().enumerate() {
            prefix[i + 1] = prefix[i] + (y[rows[o]] == 1) as usize;
        }
        let scan = SplitScan {
            values: &vals,
            order: &order,
        };
        let found = scan.best(|nl| {
            let nr = k - nl;
            let pos_l = prefix[nl];
            parent
                - (nl as f64 * gini(pos_l, nl) + nr as f64 * gini(pos - pos_l, nr)) / k as f64
        });
        if let Some((thr, gain)) = found {
            if best.map_or(true, |(bg, _, _)| gain > bg) {
                best = Some((gain, f, thr));
            }
        }
    }

    let Some((_, feature, threshold)) = best else {
        nodes.push(Node::Leaf {
            value: majority(pos, k),
        });
        return nodes.len() - 1;
    };

    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&r| x[[r, feature]] <= threshold);
    let at = nodes.len();
    nodes.push(Node::Leaf { value: f64::NAN });
    let left = grow(nodes, x, y, &left_rows, mtry, rng);
    let right = grow(nodes, x, y, &right_rows, mtry, rng);
    nodes[at] = Node::Split {
        feature,
        threshold,
        left,
        right,
    };
    at
}

#[cfg(test)]
fn grow_tree(x: &ArrayView2<f64>, y: &[u8], rows: &[usize], mtry: usize, seed: u64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    grow(&mut nodes, x, y, rows, mtry, &mut rng);
    Tree { nodes }
}

/// Random forest: `ntree` purity-grown CART trees on bootstrap samples,
/// Gini splits over `mtry` randomly drawn features; ties broken toward the
/// lowest feature index, then the lowest threshold.
pub fn fit_random_forest(design: &DesignMatrix, y: &[u8], cfg: &ForestConfig) -> Result<ForestModel> {
    let (n, p) = (design.n(), design.p());
    assert_eq!(n, y.len());
    if cfg.mtry < 1 || cfg.mtry > p {
        return Err(Error::Config(format!(
            "mtry must lie in 1..={p}, got {}",
            cfg.mtry
        )));
    }
    if cfg.ntree < 1 {
        return Err(Error::Config("ntree must be at least 1".into()));
    }

    let mut root = ChaCha8Rng::seed_from_u64(cfg.seed);
    let seeds: Vec<u64> = (0..cfg.ntree).map(|_| root.gen()).collect();
    let x = design.raw.view();
    let grown: Vec<(Tree, Vec<bool>)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut inbag = vec![false; n];
            for &r in &rows {
                inbag[r] = true;
            }
            let mut nodes = Vec::new();
            grow(&mut nodes, &x, y, &rows, cfg.mtry, &mut rng);
            (Tree { nodes }, inbag)
        })
        .collect();

    let mut oob = Vec::with_capacity(n);
    for i in 0..n {
        let row = design.raw.row(i);
        let mut votes = 0.0;
        let mut count = 0usize;
        for (tree, inbag) in &grown {
            if !inbag[i] {
                votes += tree.predict_row(&row);
                count += 1;
            }
        }
        oob.push((count > 0).then(|| votes / count as f64));
    }

    Ok(ForestModel {
        trees: grown.into_iter().map(|(t, _)| t).collect(),
        oob,
        p,
    })
}
