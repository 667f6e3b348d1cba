use serde::{Deserialize, Serialize};

use super::{check_row, lr_fit, rf_fit, svm_fit, Classifier, LrModel, ModelError, ModelParams, RfModel, SvmModel};

/// Uniform soft vote over LR, SVM and RF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub lr: LrModel,
    pub svm: SvmModel,
    pub rf: RfModel,
}

/// Arithmetic mean of member scores.
pub fn ensemble_score(member_scores: &[f64]) -> f64 {
    member_scores.iter().sum::<f64>() / member_scores.len() as f64
}

impl EnsembleModel {
    pub fn from_members(lr: LrModel, svm: SvmModel, rf: RfModel) -> Result<Self, ModelError> {
        let dims = vec![lr.n_features(), svm.n_features(), rf.n_features()];
        if dims.iter().any(|&d| d != dims[0]) {
            return Err(ModelError::SchemaMismatch(dims));
        }
        Ok(EnsembleModel { lr, svm, rf })
    }

    /// Fits the three members in parallel.
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &ModelParams) -> Result<Self, ModelError> {
        let balanced = params.balanced_class_weights;
        let lr_p = super::LrParams { balanced_class_weights: params.lr.balanced_class_weights || balanced, ..params.lr };
        let svm_p = super::SvmParams { balanced_class_weights: params.svm.balanced_class_weights || balanced, ..params.svm };
        let rf_p = super::RfParams { balanced_class_weights: params.rf.balanced_class_weights || balanced, ..params.rf };
        let ((lr, svm), rf) = rayon::join(|| rayon::join(|| lr_fit(x, y, &lr_p), || svm_fit(x, y, &svm_p)), || rf_fit(x, y, &rf_p));
        Self::from_members(lr?, svm?, rf?)
    }

    /// `[lr, svm, rf]` scores for one row.
    pub fn member_scores(&self, x: &[f64]) -> Result<[f64; 3], ModelError> {
        check_row(x, self.n_features())?;
        Ok([self.lr.score(x)?, self.svm.score(x)?, self.rf.score(x)?])
    }
}

impl Classifier for EnsembleModel {
    fn n_features(&self) -> usize {
        self.lr.n_features()
    }

    fn score(&self, x: &[f64]) -> Result<f64, ModelError> {
        Ok(ensemble_score(&self.member_scores(x)?))
    }
}
