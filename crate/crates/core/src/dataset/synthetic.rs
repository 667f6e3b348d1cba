//! Seeded synthetic crime data with planted hotspot zones, standing in for
//! proprietary police exports.
//!
//! Each record may be positive for several categories at once: one
//! description-driven category (assault, property damage, motor vehicle or
//! none) plus the independent alcohol flag. Its location is anchored to one
//! of its positive categories chosen uniformly; with the zone-draw
//! probability it lands inside one of that category's zones, otherwise
//! anywhere in the bounding box. Records positive for nothing are uniform.

use std::f64::consts::PI;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CrimeCategory, CrimeRecord, DatasetError, TimeOfDay};
use crate::geo::{haversine_km, EarthModel, GeoPoint};
use crate::geocoding::Taxonomy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundingBox {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
}

impl BoundingBox {
    /// Roughly the Halifax peninsula and Dartmouth.
    pub const HALIFAX: BoundingBox = BoundingBox { lat_min: 44.60, lat_max: 44.72, lon_min: -63.70, lon_max: -63.50 };

    fn sample(&self, rng: &mut impl Rng) -> GeoPoint {
        GeoPoint::new(rng.random_range(self.lat_min..self.lat_max), rng.random_range(self.lon_min..self.lon_max))
            .expect("validated bounding box")
    }
}

impl Default for BoundingBox {
    fn default() -> Self {
        Self::HALIFAX
    }
}

/// Positive-class probability per category. The three description-driven
/// categories are mutually exclusive and must sum to at most 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryBalances {
    pub alcohol_related: f64,
    pub assault: f64,
    pub property_damage: f64,
    pub motor_vehicle: f64,
}

impl CategoryBalances {
    pub fn get(&self, c: CrimeCategory) -> f64 {
        match c {
            CrimeCategory::AlcoholRelated => self.alcohol_related,
            CrimeCategory::Assault => self.assault,
            CrimeCategory::PropertyDamage => self.property_damage,
            CrimeCategory::MotorVehicle => self.motor_vehicle,
        }
    }
}

impl Default for CategoryBalances {
    fn default() -> Self {
        CategoryBalances { alcohol_related: 0.53, assault: 0.30, property_damage: 0.30, motor_vehicle: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub seed: u64,
    /// Records per period.
    pub n: usize,
    pub years: [i32; 2],
    pub bbox: BoundingBox,
    pub zones_per_category: usize,
    pub zone_radius_km: f64,
    pub min_zone_separation_km: f64,
    pub zone_draw_probability: f64,
    pub balances: CategoryBalances,
    /// Probability that a positive record's hour comes from its anchor
    /// category's typical time band rather than uniformly.
    pub temporal_signal: f64,
    pub background_pois: usize,
    pub pois_per_zone: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            seed: 0,
            n: 2000,
            years: [2015, 2016],
            bbox: BoundingBox::HALIFAX,
            zones_per_category: 3,
            zone_radius_km: 0.35,
            min_zone_separation_km: 1.5,
            zone_draw_probability: 0.85,
            balances: CategoryBalances::default(),
            temporal_signal: 0.2,
            background_pois: 1500,
            pois_per_zone: 12,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::Config(m));
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.years[0] == self.years[1] {
            return bad("the two periods need distinct years".into());
        }
        let b = &self.bbox;
        if GeoPoint::new(b.lat_min, b.lon_min).is_err() || GeoPoint::new(b.lat_max, b.lon_max).is_err() || b.lat_min >= b.lat_max || b.lon_min >= b.lon_max {
            return bad(format!("invalid bounding box {b:?}"));
        }
        for (name, p) in [
            ("zone_draw_probability", self.zone_draw_probability),
            ("temporal_signal", self.temporal_signal),
            ("balances.alcohol_related", self.balances.alcohol_related),
            ("balances.assault", self.balances.assault),
            ("balances.property_damage", self.balances.property_damage),
            ("balances.motor_vehicle", self.balances.motor_vehicle),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        let described = self.balances.assault + self.balances.property_damage + self.balances.motor_vehicle;
        if described > 1.0 + 1e-12 {
            return bad(format!("assault + property_damage + motor_vehicle balances sum to {described} > 1"));
        }
        if self.zones_per_category == 0 || !(self.zone_radius_km > 0.0) || self.min_zone_separation_km < 0.0 {
            return bad("zones need a positive count and radius".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Zone {
    pub category: CrimeCategory,
    pub index: usize,
    pub center: GeoPoint,
    pub radius_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentAssignment {
    pub id: String,
    pub anchor: Option<CrimeCategory>,
    /// Index into [`GroundTruth::zones`] when the record was drawn in a zone.
    pub zone: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub zone_draw_probability: f64,
    pub zones: Vec<Zone>,
    pub assignments: Vec<LatentAssignment>,
}

impl GroundTruth {
    pub fn zones_of(&self, category: CrimeCategory) -> impl Iterator<Item = &Zone> {
        self.zones.iter().filter(move |z| z.category == category)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoiRow {
    pub id: u64,
    pub location: GeoPoint,
    pub osm_type: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    /// Hotspot-training period (`years[0]`).
    pub period_a: Vec<CrimeRecord>,
    /// Evaluation period (`years[1]`).
    pub period_b: Vec<CrimeRecord>,
    pub pois: Vec<PoiRow>,
    pub ground_truth: GroundTruth,
}

fn descriptions(c: Option<CrimeCategory>) -> &'static [&'static str] {
    match c {
        Some(CrimeCategory::Assault) => {
            &["ASSAULT", "AGGRAVATED ASSAULT", "SEXUAL ASSAULT", "ASSAULT CAUSING BODILY HARM", "UTTERING THREATS"]
        }
        Some(CrimeCategory::PropertyDamage) => {
            &["BREAK AND ENTER", "THEFT UNDER $5000", "THEFT FROM VEHICLE", "ROBBERY", "MISCHIEF TO PROPERTY"]
        }
        Some(CrimeCategory::MotorVehicle) => {
            &["MOTOR VEHICLE COLLISION", "MOTOR VEHICLE ACT VIOLATION", "IMPAIRED OPERATION OF A CONVEYANCE"]
        }
        _ => &["DISTURBANCE", "SUSPICIOUS PERSON", "FALSE ALARM", "NOISE COMPLAINT", "WELLBEING CHECK"],
    }
}

/// Hours at which a category's incidents concentrate.
fn hour_band(c: CrimeCategory) -> &'static [u8] {
    match c {
        CrimeCategory::AlcoholRelated => &[22, 23, 0, 1, 2, 3],
        CrimeCategory::Assault => &[18, 19, 20, 21, 22, 23],
        CrimeCategory::PropertyDamage => &[9, 10, 11, 12, 13, 14, 15, 16],
        CrimeCategory::MotorVehicle => &[7, 8, 9, 16, 17, 18],
    }
}

/// POI types planted around a category's zones.
fn zone_poi_types(c: CrimeCategory) -> &'static [&'static str] {
    match c {
        CrimeCategory::AlcoholRelated => &["pub", "bar", "nightclub", "alcohol"],
        CrimeCategory::Assault => &["fast_food", "bus_station", "hostel", "cafe"],
        CrimeCategory::PropertyDamage => &["supermarket", "convenience", "mall", "department_store"],
        CrimeCategory::MotorVehicle => &["parking", "fuel", "traffic_signals", "car_wash"],
    }
}

fn offset_km(center: GeoPoint, north_km: f64, east_km: f64, earth: EarthModel) -> GeoPoint {
    let r = earth.radius_km();
    let lat = (center.lat() + (north_km / r).to_degrees()).clamp(-90.0, 90.0);
    let lon = center.lon() + (east_km / (r * center.lat().to_radians().cos())).to_degrees();
    let lon = (lon + 180.0).rem_euclid(360.0) - 180.0;
    GeoPoint::new(lat, lon).expect("clamped")
}

/// Uniform point in a disc of `radius_km`.
fn in_disc(center: GeoPoint, radius_km: f64, rng: &mut impl Rng) -> GeoPoint {
    let r = radius_km * rng.random::<f64>().sqrt();
    let theta = rng.random_range(0.0..2.0 * PI);
    offset_km(center, r * theta.cos(), r * theta.sin(), EarthModel::default())
}

fn place_zones(cfg: &SyntheticConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Zone>, DatasetError> {
    let earth = EarthModel::default();
    let margin = BoundingBox {
        lat_min: cfg.bbox.lat_min + (cfg.bbox.lat_max - cfg.bbox.lat_min) * 0.1,
        lat_max: cfg.bbox.lat_max - (cfg.bbox.lat_max - cfg.bbox.lat_min) * 0.1,
        lon_min: cfg.bbox.lon_min + (cfg.bbox.lon_max - cfg.bbox.lon_min) * 0.1,
        lon_max: cfg.bbox.lon_max - (cfg.bbox.lon_max - cfg.bbox.lon_min) * 0.1,
    };
    let mut zones: Vec<Zone> = Vec::new();
    for category in CrimeCategory::ALL {
        for index in 0..cfg.zones_per_category {
            let mut placed = false;
            for _ in 0..10_000 {
                let center = margin.sample(rng);
                if zones.iter().all(|z| haversine_km(z.center, center, earth) >= cfg.min_zone_separation_km) {
                    zones.push(Zone { category, index, center, radius_km: cfg.zone_radius_km });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(DatasetError::Config(format!(
                    "could not place {} zones {} km apart inside the bounding box",
                    4 * cfg.zones_per_category,
                    cfg.min_zone_separation_km
                )));
            }
        }
    }
    Ok(zones)
}

fn period(
    cfg: &SyntheticConfig,
    year: i32,
    zones: &[Zone],
    rng: &mut ChaCha8Rng,
) -> (Vec<CrimeRecord>, Vec<LatentAssignment>) {
    let b = &cfg.balances;
    let mut records = Vec::with_capacity(cfg.n);
    let mut latent = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        let u: f64 = rng.random();
        let described = if u < b.assault {
            Some(CrimeCategory::Assault)
        } else if u < b.assault + b.property_damage {
            Some(CrimeCategory::PropertyDamage)
        } else if u < b.assault + b.property_damage + b.motor_vehicle {
            Some(CrimeCategory::MotorVehicle)
        } else {
            None
        };
        let alcohol = rng.random::<f64>() < b.alcohol_related;
        let positives: Vec<CrimeCategory> =
            described.into_iter().chain(alcohol.then_some(CrimeCategory::AlcoholRelated)).collect();
        let anchor = positives.choose(rng).copied();

        let mut zone = None;
        let location = match anchor {
            Some(a) if rng.random::<f64>() < cfg.zone_draw_probability => {
                let candidates: Vec<usize> = (0..zones.len()).filter(|&z| zones[z].category == a).collect();
                let z = *candidates.choose(rng).expect("every category has zones");
                zone = Some(z);
                in_disc(zones[z].center, zones[z].radius_km, rng)
            }
            _ => cfg.bbox.sample(rng),
        };

        let hour = match anchor {
            Some(a) if rng.random::<f64>() < cfg.temporal_signal => *hour_band(a).choose(rng).expect("nonempty band"),
            _ => rng.random_range(0..24),
        };
        let id = format!("{year}-{:06}", i + 1);
        records.push(CrimeRecord {
            id: id.clone(),
            location,
            incident_start_time: TimeOfDay::new(hour, rng.random_range(0..60)).expect("in range"),
            month: rng.random_range(1..=12),
            weekday: rng.random_range(0..7),
            ucr_description: descriptions(described).choose(rng).expect("nonempty").to_string(),
            alcohol_flag: alcohol,
            year,
        });
        latent.push(LatentAssignment { id, anchor, zone });
    }
    (records, latent)
}

fn pois(cfg: &SyntheticConfig, zones: &[Zone], taxonomy: &Taxonomy, rng: &mut ChaCha8Rng) -> Vec<PoiRow> {
    let types: Vec<&str> = taxonomy.types().collect();
    let mut out = Vec::new();
    let mut next_id = 1u64;
    for _ in 0..cfg.background_pois {
        let osm_type = types.choose(rng).copied().unwrap_or("yes").to_string();
        out.push(PoiRow { id: next_id, location: cfg.bbox.sample(rng), osm_type });
        next_id += 1;
    }
    for z in zones {
        for _ in 0..cfg.pois_per_zone {
            let osm_type = zone_poi_types(z.category).choose(rng).expect("nonempty").to_string();
            out.push(PoiRow { id: next_id, location: in_disc(z.center, z.radius_km * 1.2, rng), osm_type });
            next_id += 1;
        }
    }
    out
}

/// Deterministic in `cfg.seed`: each component draws from its own ChaCha
/// stream.
pub fn generate_synthetic(cfg: &SyntheticConfig, taxonomy: &Taxonomy) -> Result<SyntheticDataset, DatasetError> {
    cfg.validate()?;
    let stream = |s: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(s);
        rng
    };
    let zones = place_zones(cfg, &mut stream(0))?;
    let (period_a, mut latent) = period(cfg, cfg.years[0], &zones, &mut stream(1));
    let (period_b, latent_b) = period(cfg, cfg.years[1], &zones, &mut stream(2));
    latent.extend(latent_b);
    let pois = pois(cfg, &zones, taxonomy, &mut stream(3));
    Ok(SyntheticDataset {
        period_a,
        period_b,
        pois,
        ground_truth: GroundTruth { seed: cfg.seed, zone_draw_probability: cfg.zone_draw_probability, zones, assignments: latent },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{class_balance, derive_label, LabelRules};

    fn generate(cfg: &SyntheticConfig) -> SyntheticDataset {
        generate_synthetic(cfg, &Taxonomy::default()).unwrap()
    }

    #[test]
    fn deterministic_in_seed() {
        let cfg = SyntheticConfig { seed: 17, n: 300, ..Default::default() };
        assert_eq!(generate(&cfg), generate(&cfg));
        let other = generate(&SyntheticConfig { seed: 18, ..cfg.clone() });
        assert_ne!(generate(&cfg).period_a, other.period_a);
    }

    #[test]
    fn zone_probability_one_places_every_positive_in_a_zone() {
        let cfg = SyntheticConfig { seed: 2, n: 500, zone_draw_probability: 1.0, ..Default::default() };
        let data = generate(&cfg);
        let e = EarthModel::default();
        for (r, l) in data.period_a.iter().zip(&data.ground_truth.assignments) {
            let Some(anchor) = l.anchor else { continue };
            let near = data
                .ground_truth
                .zones_of(anchor)
                .any(|z| haversine_km(z.center, r.location, e) <= z.radius_km + 1e-9);
            assert!(near, "{} not within a {anchor} zone", r.id);
        }
    }

    #[test]
    fn configured_balance_is_realized() {
        let balances = CategoryBalances { alcohol_related: 0.53, assault: 0.65, property_damage: 0.2, motor_vehicle: 0.1 };
        let cfg = SyntheticConfig { seed: 5, n: 2000, balances, ..Default::default() };
        let data = generate(&cfg);
        let rules = LabelRules::default();
        for c in CrimeCategory::ALL {
            let (p, n) = class_balance(&data.period_b, c, &rules).unwrap();
            assert!((p - balances.get(c)).abs() <= 0.02, "{c}: {p}");
            assert!((p + n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn descriptions_match_label_rules() {
        let rules = LabelRules::default();
        let data = generate(&SyntheticConfig { seed: 9, n: 400, ..Default::default() });
        for (r, l) in data.period_a.iter().zip(&data.ground_truth.assignments) {
            if let Some(a) = l.anchor {
                assert!(derive_label(r, a, &rules), "{} / {a}", r.ucr_description);
            }
            let described = [CrimeCategory::Assault, CrimeCategory::PropertyDamage, CrimeCategory::MotorVehicle]
                .iter()
                .filter(|&&c| derive_label(r, c, &rules))
                .count();
            assert!(described <= 1, "{}", r.ucr_description);
        }
    }

    #[test]
    fn invalid_configs() {
        let tax = Taxonomy::default();
        let mut cfg = SyntheticConfig { n: 10, ..Default::default() };
        cfg.balances.assault = 0.7;
        cfg.balances.property_damage = 0.5;
        assert!(generate_synthetic(&cfg, &tax).is_err());
        assert!(generate_synthetic(&SyntheticConfig { zone_draw_probability: 1.5, ..Default::default() }, &tax).is_err());
        assert!(generate_synthetic(&SyntheticConfig { n: 0, ..Default::default() }, &tax).is_err());
        assert!(generate_synthetic(&SyntheticConfig { years: [2016, 2016], ..Default::default() }, &tax).is_err());
        assert!(generate_synthetic(&SyntheticConfig { min_zone_separation_km: 50.0, ..Default::default() }, &tax).is_err());
    }

    #[test]
    fn periods_use_configured_years() {
        let data = generate(&SyntheticConfig { seed: 1, n: 50, ..Default::default() });
        assert!(data.period_a.iter().all(|r| r.year == 2015));
        assert!(data.period_b.iter().all(|r| r.year == 2016));
        assert_eq!(data.ground_truth.zones.len(), 12);
        assert_eq!(data.pois.len(), 1500 + 12 * 12);
    }
}
