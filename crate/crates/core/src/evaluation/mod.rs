//! Cross-validated comparison of raw and engineered features: stratified
//! folds, accuracy and ROC-AUC, paired t-tests and table rendering.

mod experiment;
mod folds;
mod metrics;
mod report;
mod ttest;

use thiserror::Error;

pub use experiment::{run_experiment, run_experiment_with_hotpoints, ClassifierId, Comparison, CvResult, EvalReport, ExperimentConfig, MetricId, REPORT_SCHEMA, REPORT_VERSION};
pub use folds::{stratified_folds, FoldPlan};
pub use metrics::{accuracy, adjusted_rand_index, roc_auc};
pub use report::{format_accuracy, format_auc, render_details, render_tables};
pub use ttest::{ln_gamma, paired_t_test, paired_t_test_at, regularized_incomplete_beta, student_t_cdf, two_tailed_p, TTestResult, DEFAULT_ALPHA};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("scores must be finite")]
    NonFiniteScore,
    #[error("both classes must be present")]
    SingleClass,
    #[error("paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("k must be at least 2, got {0}")]
    InvalidK(usize),
    #[error("class {class} has {count} members, fewer than k = {k}")]
    ClassTooSmall { class: bool, count: usize, k: usize },
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("fold plan does not partition {0} indices")]
    BadPartition(usize),
    #[error("report schema {found:?} v{version} is not supported")]
    SchemaMismatch { found: String, version: u32 },
    #[error("malformed report: {0}")]
    MalformedReport(String),
    #[error("more than one report for {0}")]
    DuplicateCategory(String),
    #[error("no reports to render")]
    NoReports,
}
