use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_row, dot, sample_weights, sigmoid, validate_training, Classifier, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    /// Hinge penalty in `1/2 |w|^2 + C * sum(hinge)`.
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
    pub balanced_class_weights: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, epochs: 100, seed: 0, balanced_class_weights: false }
    }
}

/// Logistic map of the margin: `sigmoid(a * margin + c)`, `a > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Squash {
    pub a: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub params: SvmParams,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub squash: Squash,
    /// Primal objective of the retained iterate after each epoch: the
    /// epoch-end average with the lowest objective seen so far.
    pub objective_trace: Vec<f64>,
}

fn signed(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}

/// `1/2 |w|^2 + C * sum(s_i * max(0, 1 - y_i (w.x_i + b)))`.
pub fn svm_objective(w: &[f64], b: f64, x: &[Vec<f64>], y: &[bool], sw: &[f64], c: f64) -> f64 {
    let hinge: f64 = x.iter().zip(y).zip(sw).map(|((xi, &yi), s)| s * (1.0 - signed(yi) * (dot(w, xi) + b)).max(0.0)).sum();
    0.5 * dot(w, w) + c * hinge
}

/// A subgradient of [`svm_objective`]; exact wherever no margin equals 1.
pub fn svm_subgradient(w: &[f64], b: f64, x: &[Vec<f64>], y: &[bool], sw: &[f64], c: f64) -> (Vec<f64>, f64) {
    let mut gw = w.to_vec();
    let mut gb = 0.0;
    for ((xi, &yi), s) in x.iter().zip(y).zip(sw) {
        let yv = signed(yi);
        if yv * (dot(w, xi) + b) < 1.0 {
            for (g, v) in gw.iter_mut().zip(xi) {
                *g -= c * s * yv * v;
            }
            gb -= c * s * yv;
        }
    }
    (gw, gb)
}

/// Pegasos-style stochastic subgradient descent with iterate averaging.
///
/// The objective is rescaled to `lambda/2 |w|^2 + mean(hinge)` with
/// `lambda = 1 / (C n)`; the step at update `t` is `1 / (lambda (t + t0))`
/// with `t0 = 1 / lambda` so the first steps are of order one. Each epoch
/// visits the rows in a seeded shuffle. The returned weights are the
/// epoch-end running average with the lowest primal objective.
pub fn svm_fit(x: &[Vec<f64>], y: &[bool], params: &SvmParams) -> Result<SvmModel, ModelError> {
    let d = validate_training(x, y, true)?;
    if !(params.c > 0.0 && params.c.is_finite()) || params.epochs == 0 {
        return Err(ModelError::Hyperparameter("svm needs c > 0 and epochs >= 1".into()));
    }
    let n = x.len();
    let sw = sample_weights(y, params.balanced_class_weights);
    let lambda = 1.0 / (params.c * n as f64);
    let t0 = 1.0 / lambda;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let (mut w, mut b) = (vec![0.0; d], 0.0);
    let (mut avg_w, mut avg_b) = (vec![0.0; d], 0.0);
    let mut t = 0.0f64;
    let mut trace = Vec::with_capacity(params.epochs);
    let mut best = (f64::INFINITY, Vec::new(), 0.0);
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1.0;
            let eta = 1.0 / (lambda * (t + t0));
            let yv = signed(y[i]);
            let margin = yv * (dot(&w, &x[i]) + b);
            let shrink = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                let step = eta * sw[i] * yv;
                for (wj, v) in w.iter_mut().zip(&x[i]) {
                    *wj += step * v;
                }
                b += step;
            }
            let k = 1.0 / t;
            for (a, wj) in avg_w.iter_mut().zip(&w) {
                *a += (wj - *a) * k;
            }
            avg_b += (b - avg_b) * k;
        }
        let obj = svm_objective(&avg_w, avg_b, x, y, &sw, params.c);
        if obj < best.0 {
            best = (obj, avg_w.clone(), avg_b);
        }
        trace.push(best.0);
    }
    let (_, weights, bias) = best;
    let margins: Vec<f64> = x.iter().map(|xi| dot(&weights, xi) + bias).collect();
    let squash = fit_squash(&margins, y);
    Ok(SvmModel { params: *params, weights, bias, squash, objective_trace: trace })
}

/// One-dimensional logistic regression of labels on margins with smoothed
/// targets `(n+ + 1)/(n+ + 2)` and `1/(n- + 2)`, solved by damped Newton.
/// The slope is floored at a small positive value so scores stay monotone
/// in the margin.
pub fn fit_squash(margins: &[f64], y: &[bool]) -> Squash {
    const MIN_SLOPE: f64 = 1e-6;
    let n_pos = y.iter().filter(|&&v| v).count() as f64;
    let n_neg = y.len() as f64 - n_pos;
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let targets: Vec<f64> = y.iter().map(|&v| if v { hi } else { lo }).collect();
    let nll = |a: f64, c: f64| -> f64 {
        margins
            .iter()
            .zip(&targets)
            .map(|(m, t)| {
                let z = a * m + c;
                let sp = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                sp - t * z
            })
            .sum()
    };
    let (mut a, mut c) = (1.0, 0.0);
    let mut f = nll(a, c);
    for _ in 0..100 {
        let (mut ga, mut gc, mut haa, mut hac, mut hcc) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (m, t) in margins.iter().zip(&targets) {
            let p = sigmoid(a * m + c);
            let r = p - t;
            let v = p * (1.0 - p);
            ga += r * m;
            gc += r;
            haa += v * m * m;
            hac += v * m;
            hcc += v;
        }
        // small ridge keeps the Hessian invertible on separable margins
        let (haa, hcc) = (haa + 1e-12, hcc + 1e-12);
        let det = haa * hcc - hac * hac;
        let (da, dc) = if det > 0.0 { ((hcc * ga - hac * gc) / det, (haa * gc - hac * ga) / det) } else { (ga, gc) };
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-10 {
            let (na, nc) = (a - step * da, c - step * dc);
            let nf = nll(na, nc);
            if nf <= f {
                improved = nf < f;
                a = na;
                c = nc;
                f = nf;
                break;
            }
            step *= 0.5;
        }
        if !improved || (ga.abs() + gc.abs()) < 1e-12 {
            break;
        }
    }
    if a < MIN_SLOPE {
        a = MIN_SLOPE;
        // refit the intercept alone with the slope pinned
        for _ in 0..100 {
            let (mut g, mut h) = (0.0, 1e-12);
            for (m, t) in margins.iter().zip(&targets) {
                let p = sigmoid(a * m + c);
                g += p - t;
                h += p * (1.0 - p);
            }
            c -= g / h;
            if g.abs() < 1e-12 {
                break;
            }
        }
    }
    Squash { a, c }
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> Result<f64, ModelError> {
        check_row(x, self.weights.len())?;
        Ok(dot(&self.weights, x) + self.bias)
    }
}

impl Classifier for SvmModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(sigmoid(self.squash.a * self.decision(x)? + self.squash.c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::testdata::{blobs, random_instance};

    #[test]
    fn separable_blobs_fit_perfectly() {
        let (x, y) = blobs(3, 120, 2, 8.0);
        let m = svm_fit(&x, &y, &SvmParams::default()).unwrap();
        for (xi, &yi) in x.iter().zip(&y) {
            assert_eq!(m.decision(xi).unwrap() >= 0.0, yi);
            assert_eq!(m.predict(xi).unwrap(), yi);
        }
    }

    #[test]
    fn objective_trace_never_increases() {
        let (x, y) = blobs(5, 200, 3, 1.5);
        let m = svm_fit(&x, &y, &SvmParams::default()).unwrap();
        assert_eq!(m.objective_trace.len(), 100);
        for w in m.objective_trace.windows(2) {
            assert!(w[1] <= w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn subgradient_matches_finite_differences_off_kinks() {
        for seed in 0..20 {
            let (x, y) = random_instance(seed, 8, 3);
            let sw = vec![1.0; 8];
            let w = vec![0.4, -0.3, 0.2];
            let b = 0.1;
            let h = 1e-6;
            // the chosen point must keep every margin away from the kink
            let closest = x.iter().zip(&y).map(|(xi, &yi)| (signed(yi) * (dot(&w, xi) + b) - 1.0).abs()).fold(f64::INFINITY, f64::min);
            if closest < 1e-3 {
                continue;
            }
            let (gw, gb) = svm_subgradient(&w, b, &x, &y, &sw, 1.0);
            for j in 0..=3 {
                let f = |delta: f64| {
                    let mut w2 = w.clone();
                    let mut b2 = b;
                    if j < 3 { w2[j] += delta } else { b2 += delta }
                    svm_objective(&w2, b2, &x, &y, &sw, 1.0)
                };
                let fd = (f(h) - f(-h)) / (2.0 * h);
                let an = if j < 3 { gw[j] } else { gb };
                assert!((fd - an).abs() <= 1e-4 * an.abs().max(1e-4), "seed {seed} coord {j}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn squash_matches_reference_fit() {
        let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/platt.json")).unwrap();
        let fx: serde_json::Value = serde_json::from_str(&text).unwrap();
        let margins: Vec<f64> = fx["margins"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let labels: Vec<bool> = fx["labels"].as_array().unwrap().iter().map(|v| v.as_i64().unwrap() == 1).collect();
        let s = fit_squash(&margins, &labels);
        assert!((s.a - fx["a"].as_f64().unwrap()).abs() < 1e-6, "{s:?}");
        assert!((s.c - fx["c"].as_f64().unwrap()).abs() < 1e-6, "{s:?}");
    }

    #[test]
    fn squash_is_monotone_with_positive_slope() {
        // labels anti-correlated with margins would want a negative slope
        let margins = [-2.0, -1.0, 1.0, 2.0];
        let s = fit_squash(&margins, &[true, true, false, false]);
        assert!(s.a > 0.0);
        let m = SvmModel { params: SvmParams::default(), weights: vec![1.0], bias: 0.0, squash: s, objective_trace: vec![] };
        assert!(m.score(&[1.0]).unwrap() > m.score(&[0.0]).unwrap());
        let unit = SvmModel { squash: Squash { a: 1.0, c: 0.0 }, ..m };
        assert_eq!(unit.score(&[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn rejects_single_class() {
        assert_eq!(svm_fit(&[vec![0.0], vec![1.0]], &[false, false], &SvmParams::default()).unwrap_err(), ModelError::SingleClass);
    }
}
