//! Raw and engineered feature matrices for one crime category.
//!
//! Engineered columns, in order:
//!
//! 1. the 43 raw one-hot columns (hour, month, weekday);
//! 2. one-hot OSM category: the taxonomy's 12 categories (sorted) then
//!    `unknown`;
//! 3. one-hot OSM type: the sorted training vocabulary then `unknown`;
//! 4. per distance category: the standardized distance to the nearest
//!    hotpoint and a no-hotpoint indicator.
//!
//! By default only the target category's distance is used. All transforms
//! are fitted on training rows only and frozen in a [`FeaturePlan`].

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{derive_label, raw_feature_names, raw_features, CrimeCategory, CrimeRecord, LabelRules, RAW_FEATURE_COUNT};
use crate::geo::EarthModel;
use crate::geocoding::{GeocodeError, Geocoder, Taxonomy, UNKNOWN};
use crate::hotspots::{check_period_overlap, years_of, HotpointSet, HotspotError};

pub const PLAN_SCHEMA: &str = "crimespot.feature_plan";
pub const PLAN_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no records to featurize")]
    Empty,
    #[error(transparent)]
    Period(#[from] HotspotError),
    #[error("geocoding record {id}: {source}")]
    Geocode { id: String, source: GeocodeError },
    #[error("no hotpoint set supplied for {0}")]
    MissingHotpoints(CrimeCategory),
    #[error("{0} enrichment rows for {1} records")]
    EnrichmentMismatch(usize, usize),
    #[error("writing feature CSV: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Raw,
    Engineered,
}

impl FeatureSet {
    pub fn key(&self) -> &'static str {
        match self {
            FeatureSet::Raw => "raw",
            FeatureSet::Engineered => "engineered",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub column_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
    pub feature_set: FeatureSet,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    /// Rows and labels at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> (Vec<Vec<f64>>, Vec<bool>) {
        (indices.iter().map(|&i| self.rows[i].clone()).collect(), indices.iter().map(|&i| self.labels[i]).collect())
    }

    /// CSV with the column names plus a trailing `label` column (0/1).
    pub fn write_csv(&self, writer: impl Write) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.column_names.iter().map(String::as_str).chain(["label"]))?;
        for (row, &label) in self.rows.iter().zip(&self.labels) {
            w.write_record(row.iter().map(|v| v.to_string()).chain([u8::from(label).to_string()]))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Per-record spatial inputs: the geocoded location and the raw distance to
/// each supplied category's nearest hotpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enrichment {
    pub osm_type: String,
    pub osm_category: String,
    /// Indexed by [`CrimeCategory::index`]; `None` when the set is empty or
    /// was not supplied.
    pub distances_km: [Option<f64>; 4],
}

/// Geocodes every record once and measures its hotpoint distances.
pub fn enrich(
    records: &[CrimeRecord],
    geocoder: &dyn Geocoder,
    hotpoints: &[HotpointSet],
    earth: EarthModel,
) -> Result<Vec<Enrichment>, FeatureError> {
    records
        .par_iter()
        .map(|r| {
            let g = geocoder.reverse(r.location).map_err(|source| FeatureError::Geocode { id: r.id.clone(), source })?;
            let mut distances_km = [None; 4];
            for set in hotpoints {
                distances_km[set.crime_category.index()] = set.nearest_km(r.location, earth);
            }
            Ok(Enrichment { osm_type: g.osm_type, osm_category: g.osm_category, distances_km })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureOptions {
    /// Adds all four categories' distance columns instead of only the
    /// target's.
    pub all_category_distances: bool,
    pub allow_period_overlap: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions { all_category_distances: false, allow_period_overlap: false }
    }
}

/// Frozen standardization for one distance column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceEncoder {
    pub category: CrimeCategory,
    pub mean: f64,
    /// Population standard deviation, or 1 when it is zero.
    pub scale: f64,
    /// Value substituted for MISSING before standardization.
    pub missing_fill_km: f64,
    pub hotpoints: HotpointSet,
}

impl DistanceEncoder {
    pub fn standardize(&self, d: Option<f64>) -> f64 {
        (d.unwrap_or(self.missing_fill_km) - self.mean) / self.scale
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * self.scale + self.mean
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePlan {
    pub schema: String,
    pub version: u32,
    pub target: CrimeCategory,
    /// The taxonomy's categories; one column each plus `unknown`.
    pub category_columns: Vec<String>,
    /// Categories observed on training rows. Anything else encodes as
    /// `unknown`.
    pub category_vocabulary: Vec<String>,
    /// Taxonomy types observed on training rows, sorted.
    pub type_vocabulary: Vec<String>,
    pub distances: Vec<DistanceEncoder>,
    pub earth: EarthModel,
}

/// Geocodes `records` and fits a plan on them. See [`FeaturePlan::fit`].
pub fn fit_plan(
    records: &[CrimeRecord],
    category: CrimeCategory,
    hotpoints: &[HotpointSet],
    geocoder: &dyn Geocoder,
    taxonomy: &Taxonomy,
    options: FeatureOptions,
) -> Result<FeaturePlan, FeatureError> {
    let earth = EarthModel::default();
    let enriched = enrich(records, geocoder, hotpoints, earth)?;
    FeaturePlan::fit(records, &enriched, category, hotpoints, taxonomy, options, earth)
}

/// The 43 raw one-hot columns.
pub fn build_raw(records: &[CrimeRecord], category: CrimeCategory, rules: &LabelRules) -> Result<FeatureMatrix, FeatureError> {
    if records.is_empty() {
        return Err(FeatureError::Empty);
    }
    Ok(FeatureMatrix {
        column_names: raw_feature_names(),
        rows: records.iter().map(|r| raw_features(r).to_vec()).collect(),
        labels: records.iter().map(|r| derive_label(r, category, rules)).collect(),
        feature_set: FeatureSet::Raw,
    })
}

/// Geocodes `records` and transforms them with `plan`.
pub fn build_engineered(
    records: &[CrimeRecord],
    rules: &LabelRules,
    plan: &FeaturePlan,
    geocoder: &dyn Geocoder,
) -> Result<FeatureMatrix, FeatureError> {
    let sets: Vec<HotpointSet> = plan.distances.iter().map(|d| d.hotpoints.clone()).collect();
    let enriched = enrich(records, geocoder, &sets, plan.earth)?;
    plan.transform(records, &enriched, rules)
}

impl FeaturePlan {
    /// Learns vocabularies and distance standardization from training rows.
    /// Refuses hotpoint sets whose training years overlap the records' years
    /// unless `options.allow_period_overlap` is set.
    pub fn fit(
        records: &[CrimeRecord],
        enriched: &[Enrichment],
        target: CrimeCategory,
        hotpoints: &[HotpointSet],
        taxonomy: &Taxonomy,
        options: FeatureOptions,
        earth: EarthModel,
    ) -> Result<FeaturePlan, FeatureError> {
        if records.is_empty() {
            return Err(FeatureError::Empty);
        }
        if enriched.len() != records.len() {
            return Err(FeatureError::EnrichmentMismatch(enriched.len(), records.len()));
        }
        let distance_categories: Vec<CrimeCategory> = if options.all_category_distances { CrimeCategory::ALL.to_vec() } else { vec![target] };
        let record_years = years_of(records);
        let mut distances = Vec::with_capacity(distance_categories.len());
        for c in distance_categories {
            let set = hotpoints.iter().find(|s| s.crime_category == c).ok_or(FeatureError::MissingHotpoints(c))?;
            check_period_overlap(&set.training_years, &record_years, options.allow_period_overlap)?;
            distances.push(fit_distance(c, enriched, set.clone()));
        }
        let category_columns: Vec<String> = taxonomy.categories().map(str::to_string).collect::<BTreeSet<_>>().into_iter().collect();
        let category_vocabulary: Vec<String> = enriched
            .iter()
            .map(|e| if taxonomy.is_category(&e.osm_category) { e.osm_category.as_str() } else { UNKNOWN })
            .chain([UNKNOWN])
            .map(str::to_string)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let type_vocabulary: Vec<String> = enriched
            .iter()
            .filter(|e| taxonomy.contains_type(&e.osm_type))
            .map(|e| e.osm_type.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        Ok(FeaturePlan {
            schema: PLAN_SCHEMA.into(),
            version: PLAN_VERSION,
            target,
            category_columns,
            category_vocabulary,
            type_vocabulary,
            distances,
            earth,
        })
    }

    pub fn column_names(&self) -> Vec<String> {
        let mut names = raw_feature_names();
        names.extend(self.category_columns.iter().map(|c| format!("osm_category={c}")));
        names.push(format!("osm_category={UNKNOWN}"));
        names.extend(self.type_vocabulary.iter().map(|t| format!("osm_type={t}")));
        names.push(format!("osm_type={UNKNOWN}"));
        for d in &self.distances {
            names.push(format!("hotpoint_distance_{}", d.category.key()));
            names.push(format!("no_hotpoint_{}", d.category.key()));
        }
        names
    }

    pub fn n_columns(&self) -> usize {
        RAW_FEATURE_COUNT + self.category_columns.len() + 1 + self.type_vocabulary.len() + 1 + 2 * self.distances.len()
    }

    pub fn transform_row(&self, record: &CrimeRecord, e: &Enrichment) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.n_columns());
        row.extend_from_slice(&raw_features(record));
        let cat_known = self.category_vocabulary.binary_search(&e.osm_category).is_ok() && e.osm_category != UNKNOWN;
        let cat_slot = if cat_known { self.category_columns.binary_search(&e.osm_category).ok() } else { None };
        let base = row.len();
        row.resize(base + self.category_columns.len() + 1, 0.0);
        row[base + cat_slot.unwrap_or(self.category_columns.len())] = 1.0;
        let base = row.len();
        row.resize(base + self.type_vocabulary.len() + 1, 0.0);
        let type_slot = self.type_vocabulary.binary_search(&e.osm_type).unwrap_or(self.type_vocabulary.len());
        row[base + type_slot] = 1.0;
        for d in &self.distances {
            let raw = e.distances_km[d.category.index()];
            row.push(d.standardize(raw));
            row.push(if raw.is_none() { 1.0 } else { 0.0 });
        }
        row
    }

    /// Transforms pre-enriched records with the frozen parameters.
    pub fn transform(&self, records: &[CrimeRecord], enriched: &[Enrichment], rules: &LabelRules) -> Result<FeatureMatrix, FeatureError> {
        if records.is_empty() {
            return Err(FeatureError::Empty);
        }
        if enriched.len() != records.len() {
            return Err(FeatureError::EnrichmentMismatch(enriched.len(), records.len()));
        }
        let rows = records.par_iter().zip(enriched.par_iter()).map(|(r, e)| self.transform_row(r, e)).collect();
        Ok(FeatureMatrix {
            column_names: self.column_names(),
            rows,
            labels: records.iter().map(|r| derive_label(r, self.target, rules)).collect(),
            feature_set: FeatureSet::Engineered,
        })
    }

    /// Hex SHA-256 of the plan's canonical JSON form.
    pub fn checksum(&self) -> String {
        let json = serde_json::to_vec(self).expect("plan serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn fit_distance(category: CrimeCategory, enriched: &[Enrichment], hotpoints: HotpointSet) -> DistanceEncoder {
    let observed: Vec<f64> = enriched.iter().filter_map(|e| e.distances_km[category.index()]).collect();
    let missing_fill_km = if observed.is_empty() { 0.0 } else { 1.1 * percentile(&observed, 0.99) };
    let filled: Vec<f64> = enriched.iter().map(|e| e.distances_km[category.index()].unwrap_or(missing_fill_km)).collect();
    let n = filled.len() as f64;
    let mean = filled.iter().sum::<f64>() / n;
    let var = filled.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    DistanceEncoder { category, mean, scale: if sd > 0.0 { sd } else { 1.0 }, missing_fill_km, hotpoints }
}

/// Linear-interpolated percentile, `q` in [0, 1].
fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SyntheticConfig, TimeOfDay};
    use crate::geo::GeoPoint;
    use crate::geocoding::{GeocodeResult, GeocodeSource, OfflineGeocoder, Poi, PoiSet};
    use crate::hotspots::{build_hotspots, extract_hotpoints, Hotpoint};
    use crate::hdbscan::HdbscanParams;
    use proptest::prelude::*;

    fn record(id: usize, lat: f64, lon: f64, hour: u8, year: i32, desc: &str) -> CrimeRecord {
        CrimeRecord {
            id: format!("r{id}"),
            location: GeoPoint::new(lat, lon).unwrap(),
            incident_start_time: TimeOfDay::new(hour, 30).unwrap(),
            month: (id % 12) as u8 + 1,
            weekday: (id % 7) as u8,
            ucr_description: desc.into(),
            alcohol_flag: id % 3 == 0,
            year,
        }
    }

    fn enrichment(osm_type: &str, osm_category: &str, d: Option<f64>) -> Enrichment {
        Enrichment { osm_type: osm_type.into(), osm_category: osm_category.into(), distances_km: [None, d, None, None] }
    }

    fn assault_set(points: &[(f64, f64)], year: i32) -> HotpointSet {
        let mut set = HotpointSet::empty(CrimeCategory::Assault, &[year]);
        for (i, &(lat, lon)) in points.iter().enumerate() {
            set.hotpoints.push(Hotpoint { crime_category: CrimeCategory::Assault, location: GeoPoint::new(lat, lon).unwrap(), source_cluster_id: i });
        }
        set
    }

    struct Fixed(&'static str, &'static str);
    impl Geocoder for Fixed {
        fn reverse(&self, _: GeoPoint) -> Result<GeocodeResult, GeocodeError> {
            Ok(GeocodeResult { osm_type: self.0.into(), osm_category: self.1.into(), source: GeocodeSource::Offline, distance_km: Some(0.0) })
        }
    }

    #[test]
    fn raw_matrix_rows_are_per_record_vectors() {
        let rules = LabelRules::default();
        let recs: Vec<_> = (0..10).map(|i| record(i, 44.6, -63.6, (i * 5 % 24) as u8, 2016, if i % 2 == 0 { "assault" } else { "theft" })).collect();
        let m = build_raw(&recs, CrimeCategory::Assault, &rules).unwrap();
        assert_eq!((m.n_rows(), m.n_cols()), (10, 43));
        for (i, r) in recs.iter().enumerate() {
            assert_eq!(m.rows[i], raw_features(r).to_vec());
            assert_eq!(m.rows[i].iter().sum::<f64>(), 3.0);
            assert_eq!(m.labels[i], derive_label(r, CrimeCategory::Assault, &rules));
        }
        assert!(matches!(build_raw(&[], CrimeCategory::Assault, &rules), Err(FeatureError::Empty)));
    }

    #[test]
    fn two_point_standardization() {
        let recs = vec![record(0, 44.6, -63.6, 1, 2016, "x"), record(1, 44.6, -63.6, 1, 2016, "x")];
        let enr = vec![enrichment("pub", "amenity", Some(1.0)), enrichment("pub", "amenity", Some(3.0))];
        let set = assault_set(&[(44.0, -63.0)], 2015);
        let plan = FeaturePlan::fit(&recs, &enr, CrimeCategory::Assault, &[set], &Taxonomy::default(), FeatureOptions::default(), EarthModel::default()).unwrap();
        assert_eq!(plan.distances[0].mean, 2.0);
        assert_eq!(plan.distances[0].scale, 1.0);
        assert_eq!(plan.category_vocabulary, vec!["amenity".to_string(), "unknown".to_string()]);
        let m = plan.transform(&recs, &enr, &LabelRules::default()).unwrap();
        let last = m.n_cols() - 2;
        assert_eq!(m.rows[0][last], -1.0);
        assert_eq!(m.rows[1][last], 1.0);
    }

    #[test]
    fn empty_hotpoint_set_sets_indicator() {
        let recs: Vec<_> = (0..5).map(|i| record(i, 44.6, -63.6, 1, 2016, "x")).collect();
        let enr: Vec<_> = (0..5).map(|_| enrichment("pub", "amenity", None)).collect();
        let set = HotpointSet::empty(CrimeCategory::Assault, &[2015]);
        let plan = FeaturePlan::fit(&recs, &enr, CrimeCategory::Assault, &[set], &Taxonomy::default(), FeatureOptions::default(), EarthModel::default()).unwrap();
        assert_eq!(plan.distances[0].missing_fill_km, 0.0);
        let m = plan.transform(&recs, &enr, &LabelRules::default()).unwrap();
        for row in &m.rows {
            assert_eq!(row[row.len() - 1], 1.0);
            assert!(row.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn missing_fill_is_inflated_p99() {
        let mut enr: Vec<_> = (0..101).map(|i| enrichment("pub", "amenity", Some(i as f64))).collect();
        enr.push(enrichment("pub", "amenity", None));
        let d = fit_distance(CrimeCategory::Assault, &enr, HotpointSet::empty(CrimeCategory::Assault, &[2015]));
        assert!((d.missing_fill_km - 1.1 * 99.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_values_fold_into_unknown() {
        let tax = Taxonomy::default();
        let recs = vec![record(0, 44.6, -63.6, 1, 2016, "x"); 3];
        let train = vec![enrichment("pub", "amenity", Some(1.0)), enrichment("bar", "amenity", Some(2.0)), enrichment("mystery", "unknown", Some(3.0))];
        let plan = FeaturePlan::fit(&recs, &train, CrimeCategory::Assault, &[assault_set(&[(44.0, -63.0)], 2015)], &tax, FeatureOptions::default(), EarthModel::default()).unwrap();
        assert_eq!(plan.type_vocabulary, vec!["bar".to_string(), "pub".to_string()]);
        let names = plan.column_names();
        assert_eq!(names.len(), 43 + 13 + 3 + 2);
        let row = plan.transform_row(&recs[0], &enrichment("hospital", "amenity", Some(1.0)));
        let type_unknown = names.iter().position(|n| n == "osm_type=unknown").unwrap();
        assert_eq!(row[type_unknown], 1.0);
        // shop was never seen in training
        let row = plan.transform_row(&recs[0], &enrichment("bakery", "shop", Some(1.0)));
        let cat_unknown = names.iter().position(|n| n == "osm_category=unknown").unwrap();
        assert_eq!(row[cat_unknown], 1.0);
        assert_eq!(row[names.iter().position(|n| n == "osm_category=shop").unwrap()], 0.0);
    }

    #[test]
    fn record_at_hotpoint_has_zero_raw_distance() {
        let set = assault_set(&[(44.65, -63.6)], 2015);
        let recs = vec![record(0, 44.65, -63.6, 1, 2016, "x"), record(1, 44.7, -63.6, 1, 2016, "x")];
        let geocoder = Fixed("pub", "amenity");
        let plan = fit_plan(&recs, CrimeCategory::Assault, &[set], &geocoder, &Taxonomy::default(), FeatureOptions::default()).unwrap();
        let m = build_engineered(&recs, &LabelRules::default(), &plan, &geocoder).unwrap();
        let col = m.n_cols() - 2;
        assert_eq!(plan.distances[0].inverse(m.rows[0][col]), 0.0);
    }

    #[test]
    fn period_overlap_is_refused_unless_allowed() {
        let set = assault_set(&[(44.65, -63.6)], 2016);
        let recs = vec![record(0, 44.65, -63.6, 1, 2016, "x")];
        let g = Fixed("pub", "amenity");
        let err = fit_plan(&recs, CrimeCategory::Assault, std::slice::from_ref(&set), &g, &Taxonomy::default(), FeatureOptions::default()).unwrap_err();
        assert!(matches!(err, FeatureError::Period(HotspotError::PeriodOverlap { .. })));
        let opts = FeatureOptions { allow_period_overlap: true, ..Default::default() };
        assert!(fit_plan(&recs, CrimeCategory::Assault, &[set], &g, &Taxonomy::default(), opts).is_ok());
    }

    #[test]
    fn ablation_adds_four_distance_pairs() {
        let sets: Vec<_> = CrimeCategory::ALL.iter().map(|&c| HotpointSet { crime_category: c, ..assault_set(&[(44.65, -63.6)], 2015) }).collect();
        let recs = vec![record(0, 44.66, -63.6, 1, 2016, "x"), record(1, 44.7, -63.6, 1, 2016, "x")];
        let opts = FeatureOptions { all_category_distances: true, ..Default::default() };
        let plan = fit_plan(&recs, CrimeCategory::Assault, &sets, &Fixed("pub", "amenity"), &Taxonomy::default(), opts).unwrap();
        assert_eq!(plan.distances.len(), 4);
        assert_eq!(plan.n_columns(), 43 + 13 + 2 + 8);
        let missing = fit_plan(&recs, CrimeCategory::Assault, &sets[..2], &Fixed("pub", "amenity"), &Taxonomy::default(), opts);
        assert!(matches!(missing, Err(FeatureError::MissingHotpoints(CrimeCategory::PropertyDamage))));
    }

    #[test]
    fn synthetic_positives_are_closer_to_hotpoints() {
        let tax = Taxonomy::default();
        let rules = LabelRules::default();
        let data = generate_synthetic(&SyntheticConfig { seed: 21, ..Default::default() }, &tax).unwrap();
        let cat = CrimeCategory::MotorVehicle;
        let hs = build_hotspots(&data.period_a, cat, &rules, &HdbscanParams::default()).unwrap();
        let set = extract_hotpoints(&hs, cat, &years_of(&data.period_a)).unwrap();
        let pois: Vec<Poi> = data.pois.iter().map(|p| Poi { id: p.id, location: p.location, osm_type: p.osm_type.clone(), osm_category: tax.category_of(&p.osm_type).to_string() }).collect();
        let geocoder = OfflineGeocoder::new(PoiSet::new(pois));
        let enr = enrich(&data.period_b, &geocoder, &[set], EarthModel::default()).unwrap();
        let (mut pos, mut neg) = (Vec::new(), Vec::new());
        for (r, e) in data.period_b.iter().zip(&enr) {
            let d = e.distances_km[cat.index()].unwrap();
            if derive_label(r, cat, &rules) { pos.push(d) } else { neg.push(d) }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean(&pos) < mean(&neg), "{} vs {}", mean(&pos), mean(&neg));
    }

    #[test]
    fn csv_export_has_label_column() {
        let recs = vec![record(0, 44.6, -63.6, 1, 2016, "assault")];
        let m = build_raw(&recs, CrimeCategory::Assault, &LabelRules::default()).unwrap();
        let mut out = Vec::new();
        m.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().ends_with("weekday_6,label"));
        assert!(lines.next().unwrap().ends_with(",1"));
    }

    proptest! {
        #[test]
        fn plan_properties(ds in prop::collection::vec(prop::option::weighted(0.9, 0.0f64..20.0), 2..40), seed in 0u64..1000) {
            let recs: Vec<_> = ds.iter().enumerate().map(|(i, _)| record(i + seed as usize, 44.6, -63.6, (i % 24) as u8, 2016, "assault")).collect();
            let types = ["pub", "bar", "bench", "nonsense"];
            let enr: Vec<_> = ds.iter().enumerate().map(|(i, d)| enrichment(types[i % 4], if i % 4 == 3 { "unknown" } else { "amenity" }, *d)).collect();
            let set = assault_set(&[(44.0, -63.0)], 2015);
            let plan = FeaturePlan::fit(&recs, &enr, CrimeCategory::Assault, &[set], &Taxonomy::default(), FeatureOptions::default(), EarthModel::default()).unwrap();
            let before = plan.checksum();
            let m = plan.transform(&recs, &enr, &LabelRules::default()).unwrap();
            prop_assert_eq!(plan.checksum(), before);
            prop_assert_eq!(m.n_cols(), 43 + 13 + plan.type_vocabulary.len() + 1 + 2);
            let col = m.n_cols() - 2;
            for (row, d) in m.rows.iter().zip(&ds) {
                prop_assert_eq!(row.len(), m.n_cols());
                prop_assert!(row.iter().all(|v| v.is_finite()));
                if let Some(d) = d {
                    prop_assert!((plan.distances[0].inverse(row[col]) - d).abs() < 1e-9);
                }
            }
            // identical inputs give identical rows
            prop_assert_eq!(plan.transform_row(&recs[0], &enr[0]), m.rows[0].clone());
        }
    }
}
