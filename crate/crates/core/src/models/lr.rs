use serde::{Deserialize, Serialize};

use super::{check_row, dot, sample_weights, sigmoid, validate_training, Classifier, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LrParams {
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Stop once an epoch improves the loss by less than this.
    pub tolerance: f64,
    /// Recorded for provenance; full-batch descent draws no random numbers.
    pub seed: u64,
    pub balanced_class_weights: bool,
}

impl Default for LrParams {
    fn default() -> Self {
        LrParams { l2_lambda: 1e-4, learning_rate: 0.1, max_epochs: 500, tolerance: 1e-8, seed: 0, balanced_class_weights: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrModel {
    pub params: LrParams,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs_run: usize,
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Weighted mean log-loss plus `lambda / 2 * |w|^2` (bias unpenalized).
pub fn lr_loss(w: &[f64], b: f64, x: &[Vec<f64>], y: &[bool], sw: &[f64], lambda: f64) -> f64 {
    let total: f64 = sw.iter().sum();
    let data: f64 = x
        .iter()
        .zip(y)
        .zip(sw)
        .map(|((xi, &yi), &s)| {
            let z = dot(w, xi) + b;
            s * (softplus(z) - if yi { z } else { 0.0 })
        })
        .sum();
    data / total + 0.5 * lambda * dot(w, w)
}

/// Analytic gradient of [`lr_loss`] with respect to `(w, b)`.
pub fn lr_gradient(w: &[f64], b: f64, x: &[Vec<f64>], y: &[bool], sw: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let total: f64 = sw.iter().sum();
    let mut gw = vec![0.0; w.len()];
    let mut gb = 0.0;
    for ((xi, &yi), &s) in x.iter().zip(y).zip(sw) {
        let r = s * (sigmoid(dot(w, xi) + b) - if yi { 1.0 } else { 0.0 });
        for (g, v) in gw.iter_mut().zip(xi) {
            *g += r * v;
        }
        gb += r;
    }
    for (g, wj) in gw.iter_mut().zip(w) {
        *g = *g / total + lambda * wj;
    }
    (gw, gb / total)
}

/// Full-batch gradient descent on [`lr_loss`].
pub fn lr_fit(x: &[Vec<f64>], y: &[bool], params: &LrParams) -> Result<LrModel, ModelError> {
    let d = validate_training(x, y, true)?;
    if !(params.l2_lambda >= 0.0 && params.learning_rate > 0.0 && params.learning_rate.is_finite()) {
        return Err(ModelError::Hyperparameter("lr needs l2_lambda >= 0 and learning_rate > 0".into()));
    }
    let sw = sample_weights(y, params.balanced_class_weights);
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut loss = lr_loss(&w, b, x, y, &sw, params.l2_lambda);
    let mut epochs_run = 0;
    for _ in 0..params.max_epochs {
        let (gw, gb) = lr_gradient(&w, b, x, y, &sw, params.l2_lambda);
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= params.learning_rate * g;
        }
        b -= params.learning_rate * gb;
        epochs_run += 1;
        let next = lr_loss(&w, b, x, y, &sw, params.l2_lambda);
        let improvement = loss - next;
        loss = next;
        if improvement < params.tolerance {
            break;
        }
    }
    Ok(LrModel { params: *params, weights: w, bias: b, epochs_run })
}

impl Classifier for LrModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        check_row(x, self.weights.len())?;
        Ok(sigmoid(dot(&self.weights, x) + self.bias))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testdata::random_instance;

    #[test]
    fn separable_one_dimensional() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..20 {
            x.push(vec![-1.0]);
            y.push(false);
            x.push(vec![1.0]);
            y.push(true);
        }
        let m = lr_fit(&x, &y, &LrParams::default()).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(m.predict(xi).unwrap(), yi);
        }
    }

    #[test]
    fn heavy_penalty_shrinks_weights() {
        let (x, y) = random_instance(4, 40, 5);
        let m = lr_fit(&x, &y, &LrParams { l2_lambda: 1e6, learning_rate: 1e-7, ..Default::default() }).unwrap();
        assert!(dot(&m.weights, &m.weights).sqrt() < 1e-2);
    }

    #[test]
    fn scores_by_hand() {
        let zero = LrModel { params: LrParams::default(), weights: vec![0.0, 0.0], bias: 0.0, epochs_run: 0 };
        assert_eq!(zero.score(&[3.0, -1.0]).unwrap(), 0.5);
        let sat = LrModel { bias: 100.0, ..zero.clone() };
        assert!(sat.score(&[0.0, 0.0]).unwrap() >= 1.0 - 1e-9);
        let m = LrModel { weights: vec![0.5, -0.25], bias: 0.1, ..zero };
        // z = 0.5 * 2 - 0.25 * 4 + 0.1 = 0.1
        let expected = 1.0 / (1.0 + (-0.1f64).exp());
        assert!((m.score(&[2.0, 4.0]).unwrap() - expected).abs() < 1e-15);
        assert!(matches!(m.score(&[1.0]), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(lr_fit(&[vec![0.0], vec![1.0]], &[true, true], &LrParams::default()).unwrap_err(), ModelError::SingleClass);
        assert!(matches!(lr_fit(&[vec![f64::INFINITY], vec![1.0]], &[true, false], &LrParams::default()), Err(ModelError::NonFinite { .. })));
    }

    fn gradient_error(seed: u64) -> f64 {
        let (x, y) = random_instance(seed, 5, 4);
        let sw = vec![1.0; 5];
        let lambda = 0.3;
        let w: Vec<f64> = (0..4).map(|j| 0.3 * j as f64 - 0.5).collect();
        let b = 0.2;
        let (gw, gb) = lr_gradient(&w, b, &x, &y, &sw, lambda);
        let h = 1e-5;
        let mut worst = 0.0f64;
        for j in 0..=4 {
            let shifted = |delta: f64| {
                let mut w2 = w.clone();
                let mut b2 = b;
                if j < 4 { w2[j] += delta } else { b2 += delta }
                lr_loss(&w2, b2, &x, &y, &sw, lambda)
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let an = if j < 4 { gw[j] } else { gb };
            worst = worst.max((fd - an).abs() / an.abs().max(1e-8));
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for seed in 0..20 {
            assert!(gradient_error(seed) < 1e-5, "seed {seed}");
        }
    }

    #[test]
    fn loss_decreases_and_stops_early() {
        let (x, y) = random_instance(9, 50, 3);
        let m = lr_fit(&x, &y, &LrParams { max_epochs: 100_000, ..Default::default() }).unwrap();
        assert!(m.epochs_run < 100_000);
        let sw = vec![1.0; 50];
        assert!(lr_loss(&m.weights, m.bias, &x, &y, &sw, 1e-4) < lr_loss(&[0.0; 3], 0.0, &x, &y, &sw, 1e-4));
    }
}
