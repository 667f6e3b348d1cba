//! Per-category hotspots (HDBSCAN clusters of positive incidents), their
//! hotpoints (spherical centroids) and the distance-to-nearest-hotpoint
//! feature.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dataset::{derive_label, CrimeCategory, CrimeRecord, LabelRules};
use crate::geo::{haversine_km, spherical_centroid, EarthModel, GeoError, GeoPoint};
use crate::hdbscan::{self, HdbscanError, HdbscanParams, Metric};

const ARTIFACT_MAGIC: &[u8; 4] = b"CSHP";
const ARTIFACT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum HotspotError {
    #[error(transparent)]
    Clustering(#[from] HdbscanError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("hotspots must be clustered with the haversine metric")]
    WrongMetric,
    #[error(
        "hotspot training period {train:?} overlaps evaluation period {eval:?}; \
         pass --allow-period-overlap to override"
    )]
    PeriodOverlap { train: Vec<i32>, eval: Vec<i32> },
    #[error("hotpoint artifact: {0}")]
    Artifact(String),
    #[error("hotpoint artifact I/O: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    pub crime_category: CrimeCategory,
    pub cluster_id: usize,
    pub members: Vec<GeoPoint>,
    /// Ids of the member records, for auditing which period they came from.
    pub member_ids: Vec<String>,
    pub stability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hotpoint {
    pub crime_category: CrimeCategory,
    pub location: GeoPoint,
    pub source_cluster_id: usize,
}

/// Hotpoints of one category, fitted on one training period. May be empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotpointSet {
    pub crime_category: CrimeCategory,
    pub hotpoints: Vec<Hotpoint>,
    pub training_period: String,
    pub training_years: Vec<i32>,
}

impl HotpointSet {
    pub fn empty(crime_category: CrimeCategory, training_years: &[i32]) -> Self {
        HotpointSet { crime_category, hotpoints: Vec::new(), training_period: period_label(training_years), training_years: sorted_years(training_years) }
    }

    pub fn is_empty(&self) -> bool {
        self.hotpoints.is_empty()
    }

    pub fn len(&self) -> usize {
        self.hotpoints.len()
    }

    /// Shortest great-circle distance to any hotpoint; `None` when empty.
    pub fn nearest_km(&self, p: GeoPoint, earth: EarthModel) -> Option<f64> {
        self.hotpoints.iter().map(|h| haversine_km(p, h.location, earth)).reduce(f64::min)
    }

    pub fn write_artifact(&self, mut w: impl Write) -> Result<(), HotspotError> {
        w.write_all(ARTIFACT_MAGIC)?;
        w.write_all(&ARTIFACT_VERSION.to_le_bytes())?;
        w.write_all(&[self.crime_category.index() as u8])?;
        let label = self.training_period.as_bytes();
        w.write_all(&(label.len() as u32).to_le_bytes())?;
        w.write_all(label)?;
        w.write_all(&(self.training_years.len() as u32).to_le_bytes())?;
        for y in &self.training_years {
            w.write_all(&y.to_le_bytes())?;
        }
        w.write_all(&(self.hotpoints.len() as u32).to_le_bytes())?;
        for h in &self.hotpoints {
            w.write_all(&(h.source_cluster_id as u32).to_le_bytes())?;
            w.write_all(&h.location.lat().to_le_bytes())?;
            w.write_all(&h.location.lon().to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_artifact(mut r: impl Read) -> Result<Self, HotspotError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != ARTIFACT_MAGIC {
            return Err(HotspotError::Artifact("not a hotpoint artifact".into()));
        }
        let version = u16::from_le_bytes(read_array(&mut r)?);
        if version != ARTIFACT_VERSION {
            return Err(HotspotError::Artifact(format!("unsupported version {version}")));
        }
        let [cat] = read_array::<1>(&mut r)?;
        let crime_category = *CrimeCategory::ALL
            .get(cat as usize)
            .ok_or_else(|| HotspotError::Artifact(format!("bad category index {cat}")))?;
        let len = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut label = vec![0u8; len];
        r.read_exact(&mut label)?;
        let training_period = String::from_utf8(label).map_err(|_| HotspotError::Artifact("period label is not UTF-8".into()))?;
        let n_years = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let training_years = (0..n_years).map(|_| read_array(&mut r).map(i32::from_le_bytes)).collect::<Result<_, _>>()?;
        let n = u32::from_le_bytes(read_array(&mut r)?) as usize;
        let mut hotpoints = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let source_cluster_id = u32::from_le_bytes(read_array(&mut r)?) as usize;
            let lat = f64::from_le_bytes(read_array(&mut r)?);
            let lon = f64::from_le_bytes(read_array(&mut r)?);
            hotpoints.push(Hotpoint { crime_category, location: GeoPoint::new(lat, lon)?, source_cluster_id });
        }
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(HotspotError::Artifact("trailing bytes".into()));
        }
        Ok(HotpointSet { crime_category, hotpoints, training_period, training_years })
    }
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N], HotspotError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn sorted_years(years: &[i32]) -> Vec<i32> {
    years.iter().copied().collect::<BTreeSet<_>>().into_iter().collect()
}

fn period_label(years: &[i32]) -> String {
    sorted_years(years).iter().map(|y| y.to_string()).collect::<Vec<_>>().join("+")
}

/// Distinct years present in `records`, ascending.
pub fn years_of(records: &[CrimeRecord]) -> Vec<i32> {
    sorted_years(&records.iter().map(|r| r.year).collect::<Vec<_>>())
}

/// Leakage guard between the hotspot-training and evaluation periods.
pub fn check_period_overlap(train: &[i32], eval: &[i32], allow_overlap: bool) -> Result<(), HotspotError> {
    let t: BTreeSet<_> = train.iter().collect();
    if !allow_overlap && eval.iter().any(|y| t.contains(y)) {
        return Err(HotspotError::PeriodOverlap { train: sorted_years(train), eval: sorted_years(eval) });
    }
    Ok(())
}

/// Clusters the positive records of `category`. Zero positives yields no
/// hotspots.
pub fn build_hotspots(
    records: &[CrimeRecord],
    category: CrimeCategory,
    rules: &LabelRules,
    params: &HdbscanParams,
) -> Result<Vec<Hotspot>, HotspotError> {
    if params.metric != Metric::Haversine {
        return Err(HotspotError::WrongMetric);
    }
    let positives: Vec<&CrimeRecord> = records.iter().filter(|r| derive_label(r, category, rules)).collect();
    if positives.is_empty() {
        return Ok(Vec::new());
    }
    let points: Vec<[f64; 2]> = positives.iter().map(|r| [r.location.lat(), r.location.lon()]).collect();
    let labeling = hdbscan::fit(&points, params)?;
    let hotspots = labeling
        .members()
        .into_iter()
        .enumerate()
        .map(|(cluster_id, idx)| Hotspot {
            crime_category: category,
            cluster_id,
            members: idx.iter().map(|&i| positives[i].location).collect(),
            member_ids: idx.iter().map(|&i| positives[i].id.clone()).collect(),
            stability: labeling.stabilities[cluster_id],
        })
        .collect();
    Ok(hotspots)
}

/// One hotpoint per hotspot at the spherical centroid of its members,
/// ordered by cluster id.
pub fn extract_hotpoints(hotspots: &[Hotspot], category: CrimeCategory, training_years: &[i32]) -> Result<HotpointSet, HotspotError> {
    let mut sorted: Vec<&Hotspot> = hotspots.iter().collect();
    sorted.sort_by_key(|h| h.cluster_id);
    let mut set = HotpointSet::empty(category, training_years);
    for h in sorted {
        let c = spherical_centroid(&h.members)?;
        set.hotpoints.push(Hotpoint { crime_category: h.crime_category, location: c.point, source_cluster_id: h.cluster_id });
    }
    Ok(set)
}

/// Distance to the nearest hotpoint, or `None` (MISSING) for an empty set.
pub fn distance_to_nearest_hotpoint(p: GeoPoint, set: &HotpointSet, earth: EarthModel) -> Option<f64> {
    set.nearest_km(p, earth)
}

/// Convex hull of `(lon, lat)` pairs, counter-clockwise, without repeating
/// the first vertex.
pub fn convex_hull(points: &[GeoPoint]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.iter().map(|p| [p.lon(), p.lat()]).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Hotspots as a GeoJSON FeatureCollection of convex-hull polygons.
pub fn hotspots_geojson(hotspots: &[Hotspot]) -> Value {
    let features: Vec<Value> = hotspots
        .iter()
        .map(|h| {
            let mut ring = convex_hull(&h.members);
            // degenerate hulls are padded to a closed ring of four positions
            while ring.len() < 3 {
                ring.push(*ring.last().expect("hotspots are nonempty"));
            }
            ring.push(ring[0]);
            json!({
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {
                    "crime_category": h.crime_category.key(),
                    "cluster_id": h.cluster_id,
                    "size": h.members.len(),
                    "stability": h.stability,
                },
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}

/// Hotpoints as a GeoJSON FeatureCollection of points.
pub fn hotpoints_geojson(set: &HotpointSet) -> Value {
    let features: Vec<Value> = set
        .hotpoints
        .iter()
        .map(|h| {
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [h.location.lon(), h.location.lat()]},
                "properties": {
                    "crime_category": h.crime_category.key(),
                    "source_cluster_id": h.source_cluster_id,
                    "training_period": set.training_period,
                },
            })
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}
