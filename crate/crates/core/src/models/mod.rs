//! Binary classifiers written from scratch: logistic regression, a linear
//! SVM with a logistic squashing of its margin, a CART random forest and a
//! soft-voting ensemble of the three.
//!
//! Every model scores a row with a probability-like value in `[0, 1]` and
//! predicts the positive class at `score >= 0.5`.

mod ensemble;
mod forest;
mod lr;
mod svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ensemble::{ensemble_score, EnsembleModel};
pub use forest::{rf_fit, Node, RfModel, RfParams, Tree};
pub use lr::{lr_fit, lr_gradient, lr_loss, LrModel, LrParams};
pub use svm::{fit_squash, svm_fit, svm_objective, svm_subgradient, Squash, SvmModel, SvmParams};

pub const MODEL_SCHEMA: &str = "crimespot.model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("training data is empty")]
    Empty,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, got: usize },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("invalid hyperparameter: {0}")]
    Hyperparameter(String),
    #[error("ensemble members disagree on feature count: {0:?}")]
    SchemaMismatch(Vec<usize>),
    #[error("model document: {0}")]
    Document(String),
}

/// Sigmoid that saturates gracefully for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn dot(w: &[f64], x: &[f64]) -> f64 {
    w.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Checks shape and finiteness; returns the feature count.
pub(crate) fn validate_training(x: &[Vec<f64>], y: &[bool], require_both_classes: bool) -> Result<usize, ModelError> {
    if x.is_empty() {
        return Err(ModelError::Empty);
    }
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch { rows: x.len(), labels: y.len() });
    }
    let d = x[0].len();
    for (row, r) in x.iter().enumerate() {
        if r.len() != d {
            return Err(ModelError::DimensionMismatch { row, expected: d, got: r.len() });
        }
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { row, col });
        }
    }
    if require_both_classes && (y.iter().all(|&v| v) || y.iter().all(|&v| !v)) {
        return Err(ModelError::SingleClass);
    }
    Ok(d)
}

pub(crate) fn check_row(x: &[f64], expected: usize) -> Result<(), ModelError> {
    if x.len() != expected {
        return Err(ModelError::DimensionMismatch { row: 0, expected, got: x.len() });
    }
    Ok(())
}

/// Per-sample weights: all ones, or `n / (2 n_class)` when balanced.
pub(crate) fn sample_weights(y: &[bool], balanced: bool) -> Vec<f64> {
    if !balanced {
        return vec![1.0; y.len()];
    }
    let n = y.len() as f64;
    let pos = y.iter().filter(|&&v| v).count() as f64;
    let neg = n - pos;
    y.iter().map(|&v| if v { n / (2.0 * pos.max(1.0)) } else { n / (2.0 * neg.max(1.0)) }).collect()
}

/// Common interface over the fitted models.
pub trait Classifier: Send + Sync {
    fn n_features(&self) -> usize;

    fn score(&self, x: &[f64]) -> Result<f64, ModelError>;

    fn predict(&self, x: &[f64]) -> Result<bool, ModelError> {
        Ok(self.score(x)? >= 0.5)
    }

    fn score_all(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, ModelError> {
        rows.iter().map(|r| self.score(r)).collect()
    }
}

/// Hyperparameters for all four classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub lr: LrParams,
    pub svm: SvmParams,
    pub rf: RfParams,
    /// Weights samples by inverse class frequency (ablation only).
    pub balanced_class_weights: bool,
}

impl ModelParams {
    /// Same hyperparameters with every seed replaced.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.lr.seed = seed;
        self.svm.seed = seed;
        self.rf.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SavedModel {
    Lr(LrModel),
    Svm(SvmModel),
    Rf(RfModel),
    Ensemble(EnsembleModel),
}

impl SavedModel {
    pub fn as_classifier(&self) -> &dyn Classifier {
        match self {
            SavedModel::Lr(m) => m,
            SavedModel::Svm(m) => m,
            SavedModel::Rf(m) => m,
            SavedModel::Ensemble(m) => m,
        }
    }
}

/// Versioned JSON envelope for persisted models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub schema: String,
    pub version: u32,
    /// Feature column names the model was trained on.
    #[serde(default)]
    pub feature_names: Vec<String>,
    pub model: SavedModel,
}

impl ModelDocument {
    pub fn new(model: SavedModel, feature_names: Vec<String>) -> Self {
        ModelDocument { schema: MODEL_SCHEMA.into(), version: MODEL_VERSION, feature_names, model }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| ModelError::Document(e.to_string()))?;
        if doc.schema != MODEL_SCHEMA || doc.version != MODEL_VERSION {
            return Err(ModelError::Document(format!(
                "expected {MODEL_SCHEMA} v{MODEL_VERSION}, found {} v{}",
                doc.schema, doc.version
            )));
        }
        Ok(doc)
    }
}

#[cfg(test)]
pub(crate) mod testdata {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Two Gaussian blobs in `d` dimensions, centred at `±sep/2` on every axis.
    pub fn blobs(seed: u64, n: usize, d: usize, sep: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let label = i % 2 == 0;
            let c = if label { sep / 2.0 } else { -sep / 2.0 };
            x.push((0..d).map(|_| c + noise.sample(&mut rng)).collect());
            y.push(label);
        }
        (x, y)
    }

    pub fn random_instance(seed: u64, n: usize, d: usize) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
        let mut y: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        y[0] = true;
        y[1] = false;
        (x, y)
    }
}
