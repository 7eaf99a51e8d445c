use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boost::sigmoid;
use crate::dataset::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    /// Size of the single logistic hidden layer.
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_units: 5,
            epochs: 2000,
            learning_rate: 0.3,
            seed: 0,
        }
    }
}

#[derive(Debug)]
struct Params {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array1<f64>,
    b2: f64,
}

/// One-hidden-layer network, logistic activations throughout, trained by
/// full-batch gradient descent on mean cross-entropy. Inputs are
/// standardized internally; the training means and scales travel with the
/// model.
#[derive(Debug)]
pub struct MlpModel {
    params: Params,
    means: Array1<f64>,
    scales: Array1<f64>,
    pub train_loss: Vec<f64>,
}

impl MlpModel {
    pub fn predict(&self, design: &DesignMatrix) -> Array1<f64> {
        assert_eq!(
            design.p(),
            self.means.len(),
            "feature count changed since training"
        );
        let x = standardize(&design.raw.view(), &self.means, &self.scales);
        forward(&self.params, &x.view()).1
    }
}

fn standardize(x: &ArrayView2<f64>, means: &Array1<f64>, scales: &Array1<f64>) -> Array2<f64> {
    let mut out = x.to_owned();
    for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
        col.mapv_inplace(|v| (v - means[j]) / scales[j]);
    }
    out
}

fn forward(params: &Params, x: &ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let hidden = (x.dot(&params.w1.t()) + &params.b1).mapv(sigmoid);
    let output = (hidden.dot(&params.w2) + params.b2).mapv(sigmoid);
    (hidden, output)
}

/// Mean cross-entropy in its direct form: saturating to −ln(0) = ∞ on a
/// confidently wrong row is exactly the divergence signal fit_mlp watches
/// for.
fn loss(params: &Params, x: &ArrayView2<f64>, y: &[u8]) -> f64 {
    let (_, output) = forward(params, x);
    let n = y.len() as f64;
    y.iter()
        .zip(&output)
        .map(|(&yi, &pi)| if yi == 1 { -pi.ln() } else { -(1.0 - pi).ln() })
        .sum::<f64>()
        / n
}

fn gradients(params: &Params, x: &ArrayView2<f64>, y: &[u8]) -> Params {
    let n = y.len();
    let (hidden, output) = forward(params, x);
    let d2 = Array1::from_iter(
        y.iter()
            .zip(&output)
            .map(|(&yi, &pi)| (pi - yi as f64) / n as f64),
    );
    let gw2 = hidden.t().dot(&d2);
    let gb2 = d2.sum();
    let mut d1 = Array2::zeros((n, params.w2.len()));
    for i in 0..n {
        for h in 0..params.w2.len() {
            let a = hidden[[i, h]];
            d1[[i, h]] = d2[i] * params.w2[h] * a * (1.0 - a);
        }
    }
    Params {
        w1: d1.t().dot(x),
        b1: d1.sum_axis(Axis(0)),
        w2: gw2,
        b2: gb2,
    }
}

pub fn fit_mlp(design: &DesignMatrix, y: &[u8], cfg: &MlpConfig) -> Result<MlpModel> {
    let (n, p) = (design.n(), design.p());
    assert_eq!(n, y.len());
    if cfg.hidden_units == 0 {
        return Err(Error::Config("hidden_units must be at least 1".into()));
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::Config(format!(
            "learning_rate must be a positive real, got {}",
            cfg.learning_rate
        )));
    }

    let means = design.raw.mean_axis(Axis(0)).expect("non-empty design");
    let scales = design
        .raw
        .axis_iter(Axis(1))
        .zip(&means)
        .map(|(col, &m)| {
            let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            if sd < 1e-12 {
                1.0
            } else {
                sd
            }
        })
        .collect::<Array1<f64>>();
    let x = standardize(&design.raw.view(), &means, &scales);

    let h = cfg.hidden_units;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params {
        w1: Array2::from_shape_fn((h, p), |_| (rng.gen::<f64>() - 0.5) / (p as f64).sqrt()),
        b1: Array1::zeros(h),
        w2: Array1::from_shape_fn(h, |_| (rng.gen::<f64>() - 0.5) / (h as f64).sqrt()),
        b2: 0.0,
    };

    let mut train_loss = Vec::with_capacity(cfg.epochs + 1);
    train_loss.push(loss(&params, &x.view(), y));
    for _ in 0..cfg.epochs {
        let g = gradients(&params, &x.view(), y);
        params.w1.scaled_add(-cfg.learning_rate, &g.w1);
        params.b1.scaled_add(-cfg.learning_rate, &g.b1);
        params.w2.scaled_add(-cfg.learning_rate, &g.w2);
        params.b2 -= cfg.learning_rate * g.b2;
        let l = loss(&params, &x.view(), y);
        if !l.is_finite() {
            return Err(Error::Divergence(
                "network loss became non-finite; try a smaller learning_rate".into(),
            ));
        }
        train_loss.push(l);
    }

    Ok(MlpModel {
        params,
        means,
        scales,
        train_loss,
    })
}

/// Worst |backprop − central-difference| gradient entry for a freshly
/// initialized network on `(design, y)`, probing every parameter with
/// step `h`. A correct backward pass keeps this on the order of h².
pub fn gradient_check(design: &DesignMatrix, y: &[u8], cfg: &MlpConfig, h: f64) -> Result<f64> {
    let p = design.p();
    assert_eq!(design.n(), y.len());
    if cfg.hidden_units == 0 {
        return Err(Error::Config("hidden_units must be at least 1".into()));
    }
    let units = cfg.hidden_units;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = Params {
        w1: Array2::from_shape_fn((units, p), |_| (rng.gen::<f64>() - 0.5) / (p as f64).sqrt()),
        b1: Array1::from_shape_fn(units, |_| rng.gen::<f64>() - 0.5),
        w2: Array1::from_shape_fn(units, |_| (rng.gen::<f64>() - 0.5) / (units as f64).sqrt()),
        b2: rng.gen::<f64>() - 0.5,
    };
    let x = design.raw.view();
    let analytic = gradients(&params, &x, y);

    let mut worst: f64 = 0.0;
    let mut probe = |setter: &mut dyn FnMut(&mut Params, f64), grad: f64| {
        let mut shift = |delta: f64| {
            let mut q = Params {
                w1: params.w1.clone(),
                b1: params.b1.clone(),
                w2: params.w2.clone(),
                b2: params.b2,
            };
            setter(&mut q, delta);
            loss(&q, &x, y)
        };
        let numeric = (shift(h) - shift(-h)) / (2.0 * h);
        worst = worst.max((numeric - grad).abs());
    };
    for i in 0..units {
        for j in 0..p {
            probe(&mut |q, d| q.w1[[i, j]] += d, analytic.w1[[i, j]]);
        }
        probe(&mut |q, d| q.b1[i] += d, analytic.b1[i]);
        probe(&mut |q, d| q.w2[i] += d, analytic.w2[i]);
    }
    probe(&mut |q, d| q.b2 += d, analytic.b2);
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ColumnMeta;
    use crate::eval::accuracy;
    use approx::assert_abs_diff_eq;

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
    fn zero_hidden_units_is_a_config_error() {
        let design = DesignMatrix::from_raw(Array2::zeros((4, 2)), meta_for(2));
        let cfg = MlpConfig {
            hidden_units: 0,
            ..MlpConfig::default()
        };
        assert!(matches!(
            fit_mlp(&design, &[0, 1, 0, 1], &cfg).unwrap_err(),
            Error::Config(_)
        ));
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = Array2::from_shape_fn((8, 3), |_| rng.gen::<f64>() * 2.0 - 1.0);
        let y: Vec<u8> = (0..8).map(|_| rng.gen_bool(0.5) as u8).collect();
        let params = Params {
            w1: Array2::from_shape_fn((3, 3), |_| rng.gen::<f64>() - 0.5),
            b1: Array1::from_shape_fn(3, |_| rng.gen::<f64>() - 0.5),
            w2: Array1::from_shape_fn(3, |_| rng.gen::<f64>() - 0.5),
            b2: rng.gen::<f64>() - 0.5,
        };
        let g = gradients(&params, &x.view(), &y);
        let h = 1e-5;
        let mut worst: f64 = 0.0;

        let mut probe = |setter: &mut dyn FnMut(&mut Params, f64), analytic: f64| {
            let mut shift = |delta: f64| {
                let mut p = Params {
                    w1: params.w1.clone(),
                    b1: params.b1.clone(),
                    w2: params.w2.clone(),
                    b2: params.b2,
                };
                setter(&mut p, delta);
                loss(&p, &x.view(), &y)
            };
            let numeric = (shift(h) - shift(-h)) / (2.0 * h);
            worst = worst.max((numeric - analytic).abs());
        };

        for i in 0..3 {
            for j in 0..3 {
                probe(&mut |p, d| p.w1[[i, j]] += d, g.w1[[i, j]]);
            }
            probe(&mut |p, d| p.b1[i] += d, g.b1[i]);
            probe(&mut |p, d| p.w2[i] += d, g.w2[i]);
        }
        probe(&mut |p, d| p.b2 += d, g.b2);
        assert!(worst < 1e-5, "max gradient error {worst}");
    }

    #[test]
    fn separable_data_reaches_perfect_training_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let raw = Array2::from_shape_fn((60, 2), |_| rng.gen::<f64>() * 4.0 - 2.0);
        let y: Vec<u8> = (0..60).map(|i| (raw[[i, 0]] + raw[[i, 1]] > 0.0) as u8).collect();
        let design = DesignMatrix::from_raw(raw, meta_for(2));
        let cfg = MlpConfig {
            epochs: 4000,
            learning_rate: 0.5,
            ..MlpConfig::default()
        };
        let model = fit_mlp(&design, &y, &cfg).unwrap();
        let scores = model.predict(&design);
        assert_eq!(accuracy(scores.as_slice().unwrap(), &y, 0.5), 1.0);
    }

    #[test]
    fn wild_learning_rate_reports_divergence_with_a_hint() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let raw = Array2::from_shape_fn((40, 3), |_| rng.gen::<f64>() * 10.0);
        let design = DesignMatrix::from_raw(raw, meta_for(3));
        let y: Vec<u8> = (0..40).map(|_| rng.gen_bool(0.5) as u8).collect();
        let cfg = MlpConfig {
            learning_rate: 1e12,
            epochs: 200,
            ..MlpConfig::default()
        };
        match fit_mlp(&design, &y, &cfg) {
            Err(Error::Divergence(msg)) => assert!(msg.contains("learning_rate")),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn same_seed_reproduces_scores_and_probabilities_stay_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let raw = Array2::from_shape_fn((50, 4), |_| rng.gen::<f64>() * 3.0);
        let design = DesignMatrix::from_raw(raw, meta_for(4));
        let y: Vec<u8> = (0..50).map(|_| rng.gen_bool(0.6) as u8).collect();
        let cfg = MlpConfig {
            epochs: 300,
            ..MlpConfig::default()
        };
        let a = fit_mlp(&design, &y, &cfg).unwrap().predict(&design);
        let b = fit_mlp(&design, &y, &cfg).unwrap().predict(&design);
        assert_eq!(a, b);
        for &p in a.iter() {
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn constant_columns_survive_standardization() {
        let mut raw = Array2::zeros((30, 2));
        for i in 0..30 {
            raw[[i, 0]] = (i % 2) as f64;
            raw[[i, 1]] = 3.0;
        }
        let design = DesignMatrix::from_raw(raw, meta_for(2));
        let y: Vec<u8> = (0..30).map(|i| (i % 2) as u8).collect();
        let cfg = MlpConfig {
            epochs: 500,
            ..MlpConfig::default()
        };
        let model = fit_mlp(&design, &y, &cfg).unwrap();
        assert!(model.train_loss.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn standardization_matches_hand_computation() {
        let mut raw = Array2::zeros((4, 1));
        for (i, v) in [2.0, 4.0, 6.0, 8.0].iter().enumerate() {
            raw[[i, 0]] = *v;
        }
        let means = ndarray::arr1(&[5.0]);
        let scales = ndarray::arr1(&[(5.0f64).sqrt()]);
        let z = standardize(&raw.view(), &means, &scales);
        assert_abs_diff_eq!(z[[0, 0]], -3.0 / 5.0f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(z[[3, 0]], 3.0 / 5.0f64.sqrt(), epsilon = 1e-12);
    }
}
