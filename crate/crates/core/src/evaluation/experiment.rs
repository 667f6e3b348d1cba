use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{accuracy, paired_t_test_at, roc_auc, stratified_folds, EvalError, FoldPlan, TTestResult, DEFAULT_ALPHA};
use crate::dataset::{derive_label, CrimeCategory, CrimeRecord, LabelRules};
use crate::features::{build_raw, enrich, Enrichment, FeatureMatrix, FeatureOptions, FeaturePlan, FeatureSet};
use crate::geo::EarthModel;
use crate::geocoding::{Geocoder, Taxonomy};
use crate::hdbscan::HdbscanParams;
use crate::hotspots::{build_hotspots, check_period_overlap, extract_hotpoints, years_of, HotpointSet};
use crate::models::{EnsembleModel, ModelParams};
use crate::{Result, StageExt};

pub const REPORT_SCHEMA: &str = "crimespot.eval_report";
pub const REPORT_VERSION: u32 = 1;

const TESTED_QUANTITY: &str = "per-fold metric values, engineered minus raw, paired on identical folds";

/// Classifiers in report column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierId {
    Lr,
    Rf,
    Svm,
    Ensemble,
}

impl ClassifierId {
    pub const ALL: [ClassifierId; 4] = [ClassifierId::Lr, ClassifierId::Rf, ClassifierId::Svm, ClassifierId::Ensemble];

    pub fn label(&self) -> &'static str {
        match self {
            ClassifierId::Lr => "LR",
            ClassifierId::Rf => "RF",
            ClassifierId::Svm => "SVM",
            ClassifierId::Ensemble => "Ensemble",
        }
    }
}

impl fmt::Display for ClassifierId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Accuracy,
    Auc,
}

impl MetricId {
    pub const ALL: [MetricId; 2] = [MetricId::Accuracy, MetricId::Auc];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub classifier: ClassifierId,
    pub feature_set: FeatureSet,
    /// One value per fold, fold order.
    pub accuracy: Vec<f64>,
    pub auc: Vec<f64>,
}

impl CvResult {
    pub fn values(&self, metric: MetricId) -> &[f64] {
        match metric {
            MetricId::Accuracy => &self.accuracy,
            MetricId::Auc => &self.auc,
        }
    }

    pub fn mean(&self, metric: MetricId) -> f64 {
        let v = self.values(metric);
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Raw versus engineered for one classifier and metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub classifier: ClassifierId,
    pub metric: MetricId,
    pub raw_mean: f64,
    pub engineered_mean: f64,
    pub test: TTestResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub version: u32,
    pub category: CrimeCategory,
    pub k: usize,
    pub seed: u64,
    pub alpha: f64,
    /// What the paired t-tests compare.
    pub tested_quantity: String,
    pub hotpoint_training_period: String,
    pub eval_years: Vec<i32>,
    pub n_eval_records: usize,
    pub positive_fraction: f64,
    pub n_hotpoints: usize,
    /// Feature-plan checksum of each fold.
    pub plan_checksums: Vec<String>,
    pub results: Vec<CvResult>,
    pub comparisons: Vec<Comparison>,
}

impl EvalReport {
    pub fn result(&self, classifier: ClassifierId, feature_set: FeatureSet) -> Option<&CvResult> {
        self.results.iter().find(|r| r.classifier == classifier && r.feature_set == feature_set)
    }

    pub fn comparison(&self, classifier: ClassifierId, metric: MetricId) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.classifier == classifier && c.metric == metric)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Parses and checks schema, version and internal consistency.
    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let head: serde_json::Value = serde_json::from_str(text).map_err(|e| EvalError::MalformedReport(e.to_string()))?;
        let schema = head.get("schema").and_then(|v| v.as_str()).unwrap_or_default();
        let version = head.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if schema != REPORT_SCHEMA || version != REPORT_VERSION {
            return Err(EvalError::SchemaMismatch { found: schema.to_string(), version });
        }
        let report: EvalReport = serde_json::from_value(head).map_err(|e| EvalError::MalformedReport(e.to_string()))?;
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let bad = |m: String| Err(EvalError::MalformedReport(m));
        for c in ClassifierId::ALL {
            for fs in [FeatureSet::Raw, FeatureSet::Engineered] {
                let Some(r) = self.result(c, fs) else {
                    return bad(format!("missing {c} {} result", fs.key()));
                };
                if r.accuracy.len() != self.k || r.auc.len() != self.k {
                    return bad(format!("{c} {} needs exactly {} fold values", fs.key(), self.k));
                }
                if r.accuracy.iter().chain(&r.auc).any(|v| !(0.0..=1.0).contains(v)) {
                    return bad(format!("{c} {} has a metric outside [0, 1]", fs.key()));
                }
            }
            for m in MetricId::ALL {
                if self.comparison(c, m).is_none() {
                    return bad(format!("missing {c} {m:?} comparison"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub k: usize,
    pub seed: u64,
    pub alpha: f64,
    pub hdbscan: HdbscanParams,
    pub models: ModelParams,
    pub features: FeatureOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            k: 10,
            seed: 0,
            alpha: DEFAULT_ALPHA,
            hdbscan: HdbscanParams::default(),
            models: ModelParams::default(),
            features: FeatureOptions::default(),
        }
    }
}

/// Full protocol: hotpoints from `train_period`, then stratified k-fold
/// cross-validation on `eval_period` comparing raw and engineered features
/// for all four classifiers.
pub fn run_experiment(
    train_period: &[CrimeRecord],
    eval_period: &[CrimeRecord],
    category: CrimeCategory,
    rules: &LabelRules,
    geocoder: &dyn Geocoder,
    taxonomy: &Taxonomy,
    config: &ExperimentConfig,
) -> Result<EvalReport> {
    let train_years = years_of(train_period);
    check_period_overlap(&train_years, &years_of(eval_period), config.features.allow_period_overlap).stage("leakage guard")?;
    let categories: Vec<CrimeCategory> = if config.features.all_category_distances { CrimeCategory::ALL.to_vec() } else { vec![category] };
    let hotpoints = categories
        .iter()
        .map(|&c| {
            let hs = build_hotspots(train_period, c, rules, &config.hdbscan)?;
            extract_hotpoints(&hs, c, &train_years)
        })
        .collect::<Result<Vec<_>, _>>()
        .stage("building hotpoints")?;
    run_experiment_with_hotpoints(&hotpoints, eval_period, category, rules, geocoder, taxonomy, config)
}

/// As [`run_experiment`] with hotpoints built beforehand (for example
/// loaded from an artifact).
pub fn run_experiment_with_hotpoints(
    hotpoints: &[HotpointSet],
    eval_period: &[CrimeRecord],
    category: CrimeCategory,
    rules: &LabelRules,
    geocoder: &dyn Geocoder,
    taxonomy: &Taxonomy,
    config: &ExperimentConfig,
) -> Result<EvalReport> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(EvalError::InvalidAlpha(config.alpha)).stage("configuration");
    }
    let eval_years = years_of(eval_period);
    for set in hotpoints {
        check_period_overlap(&set.training_years, &eval_years, config.features.allow_period_overlap).stage("leakage guard")?;
    }
    let target_set = hotpoints
        .iter()
        .find(|s| s.crime_category == category)
        .ok_or(crate::features::FeatureError::MissingHotpoints(category))
        .stage("loading hotpoints")?;
    let earth = EarthModel::default();
    let enriched = enrich(eval_period, geocoder, hotpoints, earth).stage("geocoding")?;
    let raw = build_raw(eval_period, category, rules).stage("raw features")?;
    let labels: Vec<bool> = eval_period.iter().map(|r| derive_label(r, category, rules)).collect();
    let folds = stratified_folds(&labels, config.k, config.seed).stage("fold assignment")?;
    if !folds.check_partition(labels.len()) {
        return Err(EvalError::BadPartition(labels.len())).stage("fold assignment");
    }
    let ctx = FoldContext { folds: &folds, eval: eval_period, enriched: &enriched, raw: &raw, hotpoints, category, rules, taxonomy, config, earth };
    let per_fold: Vec<FoldOutcome> = (0..config.k).into_par_iter().map(|f| ctx.run(f)).collect::<Result<_>>()?;

    let mut results = Vec::new();
    for fs in [FeatureSet::Raw, FeatureSet::Engineered] {
        for (ci, c) in ClassifierId::ALL.into_iter().enumerate() {
            let pick = |f: &FoldOutcome| if fs == FeatureSet::Raw { f.raw[ci] } else { f.engineered[ci] };
            results.push(CvResult {
                classifier: c,
                feature_set: fs,
                accuracy: per_fold.iter().map(|f| pick(f).0).collect(),
                auc: per_fold.iter().map(|f| pick(f).1).collect(),
            });
        }
    }
    let mut comparisons = Vec::new();
    for c in ClassifierId::ALL {
        let raw_r = results.iter().find(|r| r.classifier == c && r.feature_set == FeatureSet::Raw).expect("all results present");
        let eng_r = results.iter().find(|r| r.classifier == c && r.feature_set == FeatureSet::Engineered).expect("all results present");
        for m in MetricId::ALL {
            let test = paired_t_test_at(raw_r.values(m), eng_r.values(m), config.alpha).stage("t-test")?;
            comparisons.push(Comparison { classifier: c, metric: m, raw_mean: raw_r.mean(m), engineered_mean: eng_r.mean(m), test });
        }
    }
    Ok(EvalReport {
        schema: REPORT_SCHEMA.into(),
        version: REPORT_VERSION,
        category,
        k: config.k,
        seed: config.seed,
        alpha: config.alpha,
        tested_quantity: TESTED_QUANTITY.into(),
        hotpoint_training_period: target_set.training_period.clone(),
        eval_years,
        n_eval_records: eval_period.len(),
        positive_fraction: labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64,
        n_hotpoints: target_set.len(),
        plan_checksums: per_fold.into_iter().map(|f| f.plan_checksum).collect(),
        results,
        comparisons,
    })
}

struct FoldContext<'a> {
    folds: &'a FoldPlan,
    eval: &'a [CrimeRecord],
    enriched: &'a [Enrichment],
    raw: &'a FeatureMatrix,
    hotpoints: &'a [HotpointSet],
    category: CrimeCategory,
    rules: &'a LabelRules,
    taxonomy: &'a Taxonomy,
    config: &'a ExperimentConfig,
    earth: EarthModel,
}

/// `(accuracy, auc)` per classifier in [`ClassifierId::ALL`] order.
struct FoldOutcome {
    raw: [(f64, f64); 4],
    engineered: [(f64, f64); 4],
    plan_checksum: String,
}

impl FoldContext<'_> {
    fn run(&self, fold: usize) -> Result<FoldOutcome> {
        let train_idx = self.folds.train_indices(fold);
        let test_idx = self.folds.test_indices(fold);
        let params = self.config.models.with_seed(self.config.seed.wrapping_add(fold as u64));

        let (x_train, y_train) = self.raw.select(&train_idx);
        let (x_test, y_test) = self.raw.select(test_idx);
        let raw = score_fold(&x_train, &y_train, &x_test, &y_test, &params).stage("raw-feature models")?;

        let pick_records = |idx: &[usize]| -> (Vec<CrimeRecord>, Vec<Enrichment>) {
            (idx.iter().map(|&i| self.eval[i].clone()).collect(), idx.iter().map(|&i| self.enriched[i].clone()).collect())
        };
        let (train_recs, train_enr) = pick_records(&train_idx);
        let (test_recs, test_enr) = pick_records(test_idx);
        let plan = FeaturePlan::fit(&train_recs, &train_enr, self.category, self.hotpoints, self.taxonomy, self.config.features, self.earth)
            .stage("feature plan")?;
        let train_m = plan.transform(&train_recs, &train_enr, self.rules).stage("engineered features")?;
        let test_m = plan.transform(&test_recs, &test_enr, self.rules).stage("engineered features")?;
        let engineered = score_fold(&train_m.rows, &train_m.labels, &test_m.rows, &test_m.labels, &params).stage("engineered-feature models")?;
        Ok(FoldOutcome { raw, engineered, plan_checksum: plan.checksum() })
    }
}

fn score_fold(x_train: &[Vec<f64>], y_train: &[bool], x_test: &[Vec<f64>], y_test: &[bool], params: &ModelParams) -> Result<[(f64, f64); 4]> {
    let model = EnsembleModel::fit(x_train, y_train, params)?;
    let mut scores: [Vec<f64>; 4] = Default::default();
    for x in x_test {
        let [lr, svm, rf] = model.member_scores(x)?;
        scores[0].push(lr);
        scores[1].push(rf);
        scores[2].push(svm);
        scores[3].push(crate::models::ensemble_score(&[lr, svm, rf]));
    }
    let mut out = [(0.0, 0.0); 4];
    for (slot, s) in out.iter_mut().zip(&scores) {
        let predicted: Vec<bool> = s.iter().map(|&v| v >= 0.5).collect();
        *slot = (accuracy(y_test, &predicted)?, roc_auc(y_test, s)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticConfig};
    use crate::geocoding::{OfflineGeocoder, Poi, PoiSet};
    use crate::models::RfParams;

    fn small_config(seed: u64) -> ExperimentConfig {
        let models = ModelParams { rf: RfParams { n_trees: 10, ..Default::default() }, ..Default::default() };
        ExperimentConfig { k: 5, seed, models, ..Default::default() }
    }

    fn geocoder(pois: &[crate::dataset::PoiRow], tax: &Taxonomy) -> OfflineGeocoder {
        let pois = pois.iter().map(|p| Poi { id: p.id, location: p.location, osm_type: p.osm_type.clone(), osm_category: tax.category_of(&p.osm_type).to_string() }).collect();
        OfflineGeocoder::new(PoiSet::new(pois))
    }

    #[test]
    fn report_shape_and_determinism() {
        let tax = Taxonomy::default();
        let data = generate_synthetic(&SyntheticConfig { seed: 2, n: 400, ..Default::default() }, &tax).unwrap();
        let g = geocoder(&data.pois, &tax);
        let rules = LabelRules::default();
        let run = || run_experiment(&data.period_a, &data.period_b, CrimeCategory::Assault, &rules, &g, &tax, &small_config(3)).unwrap();
        let a = run();
        a.validate().unwrap();
        assert_eq!(a.results.len(), 8);
        assert_eq!(a.comparisons.len(), 8);
        assert_eq!(a.plan_checksums.len(), 5);
        for c in &a.comparisons {
            assert_eq!(c.test.degrees_of_freedom, 4);
            assert_eq!(c.test.significant, c.test.p_value <= 0.05);
        }
        assert_eq!(a.to_json(), run().to_json());
        assert_eq!(EvalReport::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn overlapping_periods_are_refused() {
        let tax = Taxonomy::default();
        let data = generate_synthetic(&SyntheticConfig { seed: 2, n: 200, ..Default::default() }, &tax).unwrap();
        let g = geocoder(&data.pois, &tax);
        let err = run_experiment(&data.period_b, &data.period_b, CrimeCategory::Assault, &LabelRules::default(), &g, &tax, &small_config(0)).unwrap_err();
        assert!(matches!(err.root(), crate::Error::Hotspot(crate::hotspots::HotspotError::PeriodOverlap { .. })), "{err}");
        assert!(err.to_string().starts_with("leakage guard"));
    }

    #[test]
    fn different_seeds_change_folds_not_schema() {
        let tax = Taxonomy::default();
        let data = generate_synthetic(&SyntheticConfig { seed: 4, n: 300, ..Default::default() }, &tax).unwrap();
        let g = geocoder(&data.pois, &tax);
        let rules = LabelRules::default();
        let a = run_experiment(&data.period_a, &data.period_b, CrimeCategory::MotorVehicle, &rules, &g, &tax, &small_config(1)).unwrap();
        let b = run_experiment(&data.period_a, &data.period_b, CrimeCategory::MotorVehicle, &rules, &g, &tax, &small_config(2)).unwrap();
        assert_ne!(a.results, b.results);
        let keys = |r: &EvalReport| r.results.iter().map(|x| (x.classifier, x.feature_set, x.accuracy.len())).collect::<Vec<_>>();
        assert_eq!(keys(&a), keys(&b));
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(EvalReport::from_json("{\"schema\":\"other\",\"version\":1}"), Err(EvalError::SchemaMismatch { .. })));
        assert!(matches!(EvalReport::from_json("not json"), Err(EvalError::MalformedReport(_))));
    }
}
