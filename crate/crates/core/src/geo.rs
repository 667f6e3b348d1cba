//! Geodesic primitives: coordinates, haversine distance, spherical centroid
//! and a coarse lat/lon grid index for nearest-neighbour queries.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate ({lat}, {lon}): latitude must lie in [-90, 90] and longitude in [-180, 180]")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("earth radius must be positive and finite, got {0}")]
    InvalidRadius(f64),
    #[error("grid cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
    #[error("cannot compute a centroid of zero points")]
    EmptyCentroid,
    #[error("nearest-neighbour query on an empty index")]
    EmptyIndex,
}

/// A WGS84 latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;
    fn try_from(raw: RawPoint) -> Result<Self, GeoError> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if lat.is_finite() && lon.is_finite() && (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
            Ok(GeoPoint { lat, lon })
        } else {
            Err(GeoError::InvalidCoordinate { lat, lon })
        }
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }

    fn to_unit_vector(self) -> [f64; 3] {
        let (phi, lambda) = (self.lat.to_radians(), self.lon.to_radians());
        [phi.cos() * lambda.cos(), phi.cos() * lambda.sin(), phi.sin()]
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6})", self.lat, self.lon)
    }
}

/// Spherical earth used for every distance in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarthModel {
    radius_km: f64,
}

impl EarthModel {
    /// IUGG mean earth radius.
    pub const MEAN_RADIUS_KM: f64 = 6371.0088;

    pub fn new(radius_km: f64) -> Result<Self, GeoError> {
        if radius_km.is_finite() && radius_km > 0.0 {
            Ok(EarthModel { radius_km })
        } else {
            Err(GeoError::InvalidRadius(radius_km))
        }
    }

    pub fn radius_km(&self) -> f64 {
        self.radius_km
    }
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel { radius_km: Self::MEAN_RADIUS_KM }
    }
}

/// Great-circle distance in kilometres.
///
/// The two endpoints are ordered canonically before evaluation so that the
/// result is bitwise symmetric in its arguments.
pub fn haversine_km(a: GeoPoint, b: GeoPoint, earth: EarthModel) -> f64 {
    let (a, b) = if (a.lat, a.lon) <= (b.lat, b.lon) { (a, b) } else { (b, a) };
    haversine_deg(a.lat, a.lon, b.lat, b.lon, earth.radius_km)
}

/// Haversine on raw degrees; callers guarantee valid coordinates.
pub(crate) fn haversine_deg(lat1: f64, lon1: f64, lat2: f64, lon2: f64, radius_km: f64) -> f64 {
    let (phi1, phi2) = (lat1.to_radians(), lat2.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (lon2 - lon1).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * radius_km * h.sqrt().min(1.0).asin()
}

/// Checked variant of [`haversine_km`] for raw degree values.
pub fn haversine_km_raw(a: (f64, f64), b: (f64, f64), earth: EarthModel) -> Result<f64, GeoError> {
    Ok(haversine_km(GeoPoint::new(a.0, a.1)?, GeoPoint::new(b.0, b.1)?, earth))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Centroid {
    pub point: GeoPoint,
    /// The mean unit vector vanished (e.g. antipodal input) and `point` is
    /// simply the first input point.
    pub degenerate: bool,
}

/// Normalized mean of the points' 3D unit vectors, mapped back to lat/lon.
pub fn spherical_centroid(points: &[GeoPoint]) -> Result<Centroid, GeoError> {
    let first = *points.first().ok_or(GeoError::EmptyCentroid)?;
    let mut sum = [0.0f64; 3];
    for p in points {
        let v = p.to_unit_vector();
        for (s, c) in sum.iter_mut().zip(v) {
            *s += c;
        }
    }
    let n = points.len() as f64;
    let mean = sum.map(|s| s / n);
    let norm = (mean[0] * mean[0] + mean[1] * mean[1] + mean[2] * mean[2]).sqrt();
    if norm < 1e-9 {
        return Ok(Centroid { point: first, degenerate: true });
    }
    let [x, y, z] = mean.map(|c| c / norm);
    let lat = z.clamp(-1.0, 1.0).asin().to_degrees();
    let lon = if x == 0.0 && y == 0.0 { first.lon } else { y.atan2(x).to_degrees() };
    Ok(Centroid { point: GeoPoint::new(lat.clamp(-90.0, 90.0), lon.clamp(-180.0, 180.0))?, degenerate: false })
}

type CellKey = (i64, i64);

/// Uniform lat/lon bucket grid. Longitude cells wrap around the antimeridian.
#[derive(Debug, Clone)]
pub struct GridIndex {
    cell_size_deg: f64,
    lon_cells: i64,
    buckets: HashMap<CellKey, Vec<(usize, GeoPoint)>>,
    len: usize,
}

impl GridIndex {
    pub fn build(points: impl IntoIterator<Item = (usize, GeoPoint)>, cell_size_deg: f64) -> Result<Self, GeoError> {
        if !(cell_size_deg.is_finite() && cell_size_deg > 0.0) {
            return Err(GeoError::InvalidCellSize(cell_size_deg));
        }
        let lon_cells = (360.0 / cell_size_deg).ceil().max(1.0) as i64;
        let mut index = GridIndex { cell_size_deg, lon_cells, buckets: HashMap::new(), len: 0 };
        for (id, p) in points {
            let key = index.cell_of(p);
            index.buckets.entry(key).or_default().push((id, p));
            index.len += 1;
        }
        Ok(index)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn cell_size_deg(&self) -> f64 {
        self.cell_size_deg
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn bucket(&self, lat_cell: i64, lon_cell: i64) -> &[(usize, GeoPoint)] {
        self.buckets.get(&(lat_cell, lon_cell)).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn buckets(&self) -> impl Iterator<Item = (CellKey, &[(usize, GeoPoint)])> {
        self.buckets.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    pub fn cell_of(&self, p: GeoPoint) -> CellKey {
        let lat_cell = (p.lat / self.cell_size_deg).floor() as i64;
        let lon_cell = (((p.lon + 180.0) / self.cell_size_deg).floor() as i64).rem_euclid(self.lon_cells);
        (lat_cell, lon_cell)
    }

    /// Exact nearest indexed point by haversine distance; ties go to the
    /// smallest id.
    ///
    /// Rings of cells around the query cell are scanned outward until a
    /// geodesic lower bound on everything not yet scanned exceeds the best
    /// distance found.
    pub fn nearest(&self, query: GeoPoint, earth: EarthModel) -> Result<(usize, f64), GeoError> {
        if self.is_empty() {
            return Err(GeoError::EmptyIndex);
        }
        let (q_lat, q_lon) = self.cell_of(query);
        let mut best: Option<(usize, f64)> = None;
        let consider = |cands: &[(usize, GeoPoint)], best: &mut Option<(usize, f64)>| {
            for &(id, p) in cands {
                let d = haversine_km(query, p, earth);
                match *best {
                    Some((bid, bd)) if d > bd || (d == bd && id >= bid) => {}
                    _ => *best = Some((id, d)),
                }
            }
        };

        let lat_min_cell = (-90.0 / self.cell_size_deg).floor() as i64;
        let lat_max_cell = (90.0 / self.cell_size_deg).floor() as i64;
        let max_ring = (q_lat - lat_min_cell).max(lat_max_cell - q_lat).max(self.lon_cells / 2 + 1);
        let mut cells_visited: usize = 0;
        for ring in 0..=max_ring {
            for (lat_cell, lon_cell) in ring_cells(q_lat, q_lon, ring, self.lon_cells) {
                if lat_cell < lat_min_cell || lat_cell > lat_max_cell {
                    continue;
                }
                cells_visited += 1;
                if let Some(b) = self.buckets.get(&(lat_cell, lon_cell)) {
                    consider(b, &mut best);
                }
            }
            if let Some((_, bd)) = best {
                if bd < self.unscanned_lower_bound(query, q_lat, q_lon, ring, earth) {
                    break;
                }
            }
            // Sparse data far from the query: scanning every bucket is cheaper
            // than walking mostly-empty rings, and equally exact.
            if cells_visited > 4 * self.buckets.len() + 64 {
                for b in self.buckets.values() {
                    consider(b, &mut best);
                }
                break;
            }
        }
        Ok(best.expect("nonempty index yields a candidate"))
    }

    /// Lower bound on the distance from `query` to any point outside the
    /// block of cells within Chebyshev distance `ring` of the query cell.
    fn unscanned_lower_bound(&self, query: GeoPoint, q_lat: i64, q_lon: i64, ring: i64, earth: EarthModel) -> f64 {
        let cs = self.cell_size_deg;
        let r = earth.radius_km;
        let south_edge = (q_lat - ring) as f64 * cs;
        let north_edge = (q_lat + ring + 1) as f64 * cs;
        let south = if south_edge <= -90.0 { f64::INFINITY } else { (query.lat - south_edge).to_radians() * r };
        let north = if north_edge > 90.0 { f64::INFINITY } else { (north_edge - query.lat).to_radians() * r };

        let lon_bound = if 2 * ring + 1 >= self.lon_cells {
            f64::INFINITY
        } else {
            let shifted = query.lon + 180.0;
            let local = shifted - (q_lon as f64) * cs;
            let west = (ring as f64 * cs + local).to_radians();
            let east = ((ring + 1) as f64 * cs - local).to_radians();
            let dlambda = west.min(east).max(0.0);
            let phi = query.lat.to_radians();
            if dlambda >= PI / 2.0 {
                r * (PI / 2.0 - phi.abs())
            } else {
                r * (phi.cos() * dlambda.sin()).clamp(0.0, 1.0).asin()
            }
        };
        south.min(north).min(lon_bound)
    }
}

fn ring_cells(lat: i64, lon: i64, ring: i64, lon_cells: i64) -> Vec<CellKey> {
    let wrap = |c: i64| c.rem_euclid(lon_cells);
    if ring == 0 {
        return vec![(lat, wrap(lon))];
    }
    let mut out = Vec::with_capacity(8 * ring as usize);
    for dlon in -ring..=ring {
        out.push((lat - ring, wrap(lon + dlon)));
        out.push((lat + ring, wrap(lon + dlon)));
    }
    for dlat in (-ring + 1)..ring {
        out.push((lat + dlat, wrap(lon - ring)));
        out.push((lat + dlat, wrap(lon + ring)));
    }
    // Once the ring wraps past itself in longitude, some columns repeat.
    if 2 * ring + 1 > lon_cells {
        out.sort_unstable();
        out.dedup();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    #[test]
    fn rejects_out_of_range_and_non_finite() {
        assert!(GeoPoint::new(90.5, 0.0).is_err());
        assert!(GeoPoint::new(0.0, -180.1).is_err());
        assert!(GeoPoint::new(f64::NAN, 0.0).is_err());
        assert!(haversine_km_raw((f64::INFINITY, 0.0), (0.0, 0.0), EarthModel::default()).is_err());
        assert!(EarthModel::new(0.0).is_err());
    }

    #[test]
    fn identity_and_antipodal() {
        let e = EarthModel::default();
        let h = p(44.6488, -63.5752);
        assert_eq!(haversine_km(h, h, e), 0.0);
        let d = haversine_km(p(0.0, 0.0), p(0.0, 180.0), e);
        assert!((d - PI * EarthModel::MEAN_RADIUS_KM).abs() < 1e-9);
        assert!((d - 20015.1).abs() < 0.1);
    }

    #[test]
    fn centroid_examples() {
        let c = spherical_centroid(&[p(10.0, 20.0)]).unwrap();
        assert!((c.point.lat() - 10.0).abs() < 1e-12 && (c.point.lon() - 20.0).abs() < 1e-12);
        let c = spherical_centroid(&[p(0.0, 10.0), p(0.0, 20.0)]).unwrap();
        assert!(c.point.lat().abs() < 1e-12 && (c.point.lon() - 15.0).abs() < 1e-12);
        // unit vectors (±1/√2, 0, ±1/√2) and (1/√2, ±1/√2, 0) average to (1/√2, 0, 0)
        let c = spherical_centroid(&[p(45.0, 0.0), p(-45.0, 0.0), p(0.0, 45.0), p(0.0, -45.0)]).unwrap();
        assert!(c.point.lat().abs() < 1e-12 && c.point.lon().abs() < 1e-12);
        assert!(!c.degenerate);
    }

    #[test]
    fn centroid_degenerate_and_empty() {
        let c = spherical_centroid(&[p(0.0, 0.0), p(0.0, 180.0)]).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.point, p(0.0, 0.0));
        assert_eq!(spherical_centroid(&[]).unwrap_err(), GeoError::EmptyCentroid);
    }

    #[test]
    fn centroid_across_antimeridian() {
        let c = spherical_centroid(&[p(0.0, 179.0), p(0.0, -179.0)]).unwrap();
        assert!((c.point.lon().abs() - 180.0).abs() < 1e-9);
    }

    #[test]
    fn grid_counts() {
        let empty = GridIndex::build(Vec::new(), 0.01).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.nearest(p(0.0, 0.0), EarthModel::default()).unwrap_err(), GeoError::EmptyIndex);

        let idx = GridIndex::build(vec![(0, p(1.001, 1.001)), (1, p(1.002, 1.002)), (2, p(1.003, 1.009))], 0.01).unwrap();
        assert_eq!(idx.bucket_count(), 1);
        let (lat_cell, lon_cell) = idx.cell_of(p(1.001, 1.001));
        assert_eq!(idx.bucket(lat_cell, lon_cell).len(), 3);

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<_> = (0..1000).map(|i| (i, p(rng.random_range(-90.0..=90.0), rng.random_range(-180.0..=180.0)))).collect();
        let idx = GridIndex::build(pts, 3.0).unwrap();
        assert_eq!(idx.buckets().map(|(_, b)| b.len()).sum::<usize>(), 1000);
        assert_eq!(idx.len(), 1000);
        assert!(GridIndex::build(Vec::new(), 0.0).is_err());
    }

    #[test]
    fn nearest_trivial_cases() {
        let e = EarthModel::default();
        let idx = GridIndex::build(vec![(7, p(44.0, -63.0))], 0.01).unwrap();
        assert_eq!(idx.nearest(p(-30.0, 120.0), e).unwrap().0, 7);
        let idx = GridIndex::build(vec![(1, p(44.0, -63.0)), (2, p(44.5, -63.5))], 0.01).unwrap();
        assert_eq!(idx.nearest(p(44.5, -63.5), e).unwrap(), (2, 0.0));
    }

    #[test]
    fn nearest_tie_goes_to_lowest_id() {
        let e = EarthModel::default();
        let idx = GridIndex::build(vec![(5, p(0.0, 1.0)), (3, p(0.0, -1.0)), (9, p(0.0, 1.0))], 0.5).unwrap();
        assert_eq!(idx.nearest(p(0.0, 0.0), e).unwrap().0, 3);
    }

    fn brute_nearest(pts: &[(usize, GeoPoint)], q: GeoPoint, e: EarthModel) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for &(id, pt) in pts {
            let d = haversine_km(q, pt, e);
            if d < best.1 || (d == best.1 && id < best.0) {
                best = (id, d);
            }
        }
        best
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let e = EarthModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (cell, lat_span, lon_span) in [(0.01, 0.2, 0.2), (0.5, 10.0, 10.0), (5.0, 89.0, 180.0)] {
            let pts: Vec<_> = (0..200)
                .map(|i| (i, p(44.0 + rng.random_range(-lat_span..lat_span) / 2.0, rng.random_range(-lon_span..=lon_span))))
                .collect();
            let idx = GridIndex::build(pts.clone(), cell).unwrap();
            for _ in 0..50 {
                let q = p(rng.random_range(-90.0..=90.0_f64).clamp(-90.0, 90.0), rng.random_range(-180.0..=180.0));
                assert_eq!(idx.nearest(q, e).unwrap(), brute_nearest(&pts, q, e));
                let q = p(44.0 + rng.random_range(-lat_span..lat_span) / 2.0, rng.random_range(-lon_span..=lon_span));
                assert_eq!(idx.nearest(q, e).unwrap(), brute_nearest(&pts, q, e));
            }
        }
    }

    #[test]
    fn nearest_across_antimeridian_and_pole() {
        let e = EarthModel::default();
        let idx = GridIndex::build(vec![(0, p(10.0, 179.99)), (1, p(10.0, 170.0))], 0.01).unwrap();
        assert_eq!(idx.nearest(p(10.0, -179.99), e).unwrap().0, 0);
        let idx = GridIndex::build(vec![(0, p(89.9, 0.0)), (1, p(89.0, 90.0))], 0.1).unwrap();
        assert_eq!(idx.nearest(p(89.9, 180.0), e).unwrap().0, 0);
    }

    fn arb_point() -> impl Strategy<Value = GeoPoint> {
        (-90.0..=90.0f64, -180.0..=180.0f64).prop_map(|(a, b)| p(a, b))
    }

    proptest! {
        #[test]
        fn haversine_symmetric_and_bounded(a in arb_point(), b in arb_point()) {
            let e = EarthModel::default();
            let d = haversine_km(a, b, e);
            prop_assert_eq!(d, haversine_km(b, a, e));
            prop_assert!(d >= 0.0 && d <= PI * e.radius_km());
            prop_assert_eq!(haversine_km(a, a, e), 0.0);
        }

        #[test]
        fn haversine_triangle(a in arb_point(), b in arb_point(), c in arb_point()) {
            let e = EarthModel::default();
            prop_assert!(haversine_km(a, c, e) <= haversine_km(a, b, e) + haversine_km(b, c, e) + 1e-9);
        }

        #[test]
        fn centroid_of_copies(q in (-89.9..=89.9f64, -179.9..=179.9f64), k in 1usize..20) {
            let pt = p(q.0, q.1);
            let c = spherical_centroid(&vec![pt; k]).unwrap();
            prop_assert!((c.point.lat() - pt.lat()).abs() < 1e-9);
            prop_assert!((c.point.lon() - pt.lon()).abs() < 1e-9);
        }
    }
}
