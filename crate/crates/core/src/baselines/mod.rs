//! The three black-box comparators: random forest, gradient-boosted trees,
//! and a one-hidden-layer logistic network. Self-contained; no attempt to
//! match external implementations bit for bit.

mod forest;
mod gbt;
mod mlp;

pub use forest::{fit_random_forest, ForestConfig, ForestModel};
pub use gbt::{fit_gbt, GbtConfig, GbtModel};
pub use mlp::{fit_mlp, gradient_check, MlpConfig, MlpModel};

use ndarray::ArrayView1;

/// Binary decision tree in a flat arena; node 0 is the root.
#[derive(Debug, Clone)]
pub(crate) enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub(crate) struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn predict_row(&self, row: &ArrayView1<f64>) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Candidate split on one feature: rows sorted by value, threshold at the
/// midpoint between consecutive distinct values. Returns the best
/// (threshold, score gain) under `score`, which maps (left stats, right
/// stats) to a gain; ties keep the first (lowest) threshold.
pub(crate) struct SplitScan<'a> {
    pub values: &'a [f64],
    pub order: &'a [usize],
}

impl SplitScan<'_> {
    /// Sweep thresholds; `gain(n_left)` scores the prefix of `order` going
    /// left. Returns (threshold, gain) of the best strict improvement.
    pub(crate) fn best<F: FnMut(usize) -> f64>(&self, mut gain: F) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for i in 1..self.order.len() {
            let lo = self.values[self.order[i - 1]];
            let hi = self.values[self.order[i]];
            if hi <= lo {
                continue;
            }
            let g = gain(i);
            if best.map_or(g > 1e-12, |(_, bg)| g > bg) {
                best = Some((0.5 * (lo + hi), g));
            }
        }
        best
    }
}
