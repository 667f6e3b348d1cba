use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GeocodeError, GeocodeResult, GeocodeSource};
use crate::geo::GeoPoint;

/// Coordinates rounded to 5 decimals (about a metre).
pub fn cache_key(p: GeoPoint) -> String {
    let fmt = |v: f64| {
        let s = format!("{v:.5}");
        if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
            s.trim_start_matches('-').to_string()
        } else {
            s
        }
    };
    format!("{},{}", fmt(p.lat()), fmt(p.lon()))
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    result: GeocodeResult,
}

/// Append-only JSON-lines store of geocode answers. Every write replaces the
/// file atomically (temp file + rename); on reload the last entry per key
/// wins.
#[derive(Debug)]
pub struct GeocodeCache {
    path: PathBuf,
    lines: Vec<String>,
    map: HashMap<String, GeocodeResult>,
}

impl GeocodeCache {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, GeocodeError> {
        let path = path.into();
        let err = |message: String| GeocodeError::Cache { path: path.display().to_string(), message };
        let mut cache = GeocodeCache { path: path.clone(), lines: Vec::new(), map: HashMap::new() };
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(cache),
            Err(e) => return Err(err(e.to_string())),
        };
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let entry: Entry = serde_json::from_str(line).map_err(|e| err(format!("line {}: {e}", i + 1)))?;
            cache.map.insert(entry.key, entry.result);
            cache.lines.push(line.to_string());
        }
        Ok(cache)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, p: GeoPoint) -> Option<GeocodeResult> {
        self.map.get(&cache_key(p)).map(|r| GeocodeResult { source: GeocodeSource::Cache, ..r.clone() })
    }

    pub fn put(&mut self, p: GeoPoint, result: &GeocodeResult) -> Result<(), GeocodeError> {
        let key = cache_key(p);
        let line = serde_json::to_string(&Entry { key: key.clone(), result: result.clone() })
            .map_err(|e| GeocodeError::Cache { path: self.path.display().to_string(), message: e.to_string() })?;
        self.lines.push(line);
        if let Err(e) = self.persist() {
            self.lines.pop();
            return Err(e);
        }
        self.map.insert(key, result.clone());
        Ok(())
    }

    fn persist(&self) -> Result<(), GeocodeError> {
        let err = |e: std::io::Error| GeocodeError::Cache { path: self.path.display().to_string(), message: e.to_string() };
        let dir = self.path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let tmp = dir.join(format!(
            ".{}.tmp",
            self.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "cache".into())
        ));
        {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp).map_err(err)?);
            for line in &self.lines {
                writeln!(f, "{line}").map_err(err)?;
            }
            f.flush().map_err(err)?;
        }
        std::fs::rename(&tmp, &self.path).map_err(err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn result(t: &str, c: &str) -> GeocodeResult {
        GeocodeResult { osm_type: t.into(), osm_category: c.into(), source: GeocodeSource::Remote, distance_km: None }
    }

    #[test]
    fn put_get_and_miss() {
        let dir = tempfile::tempdir().unwrap();
        let mut cache = GeocodeCache::open(dir.path().join("geo.jsonl")).unwrap();
        let p = GeoPoint::new(44.6488, -63.5752).unwrap();
        assert!(cache.get(p).is_none());
        cache.put(p, &result("pub", "amenity")).unwrap();
        let got = cache.get(p).unwrap();
        assert_eq!((got.osm_type.as_str(), got.source), ("pub", GeocodeSource::Cache));
        assert!(cache.get(GeoPoint::new(44.0, -63.0).unwrap()).is_none());
    }

    #[test]
    fn rounding_rule() {
        let a = GeoPoint::new(44.1234561, -63.1234561).unwrap();
        let b = GeoPoint::new(44.1234569, -63.1234569).unwrap();
        assert_eq!(cache_key(a), cache_key(b));
        assert_eq!(cache_key(a), "44.12346,-63.12346");
        assert_eq!(cache_key(GeoPoint::new(-0.000001, 0.0).unwrap()), "0.00000,0.00000");
    }

    #[test]
    fn survives_restart_and_last_write_wins() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let p = GeoPoint::new(1.0, 2.0).unwrap();
        {
            let mut cache = GeocodeCache::open(&path).unwrap();
            cache.put(p, &result("pub", "amenity")).unwrap();
            cache.put(p, &result("bar", "amenity")).unwrap();
        }
        let cache = GeocodeCache::open(&path).unwrap();
        assert_eq!(cache.get(p).unwrap().osm_type, "bar");
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 2);
    }

    #[test]
    fn io_errors_carry_path() {
        let err = GeocodeCache::open("/proc/definitely/not/here.jsonl").map(|mut c| c.put(GeoPoint::new(0.0, 0.0).unwrap(), &result("a", "b")));
        match err {
            Ok(Err(GeocodeError::Cache { path, .. })) | Err(GeocodeError::Cache { path, .. }) => assert!(path.contains("here.jsonl")),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn reload_round_trip(entries in proptest::collection::vec((-90.0..=90.0f64, -180.0..=180.0f64, "[a-z_]{1,10}", proptest::option::of(0.0..5.0f64)), 1..12)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("c.jsonl");
            let mut cache = GeocodeCache::open(&path).unwrap();
            let mut expected = HashMap::new();
            for (lat, lon, t, d) in &entries {
                let p = GeoPoint::new(*lat, *lon).unwrap();
                let r = GeocodeResult { osm_type: t.clone(), osm_category: "amenity".into(), source: GeocodeSource::Remote, distance_km: *d };
                cache.put(p, &r).unwrap();
                expected.insert(cache_key(p), r);
            }
            let reloaded = GeocodeCache::open(&path).unwrap();
            for (lat, lon, ..) in &entries {
                let p = GeoPoint::new(*lat, *lon).unwrap();
                let want = GeocodeResult { source: GeocodeSource::Cache, ..expected[&cache_key(p)].clone() };
                prop_assert_eq!(reloaded.get(p), Some(want));
            }
        }
    }
}
