//! Location-type and location-category features from OSM points of interest.
//!
//! The offline path resolves a crime location to its nearest POI in a
//! pre-extracted CSV snapshot. The remote path asks a Nominatim-compatible
//! `/reverse` endpoint and caches answers on disk. Both produce a
//! [`GeocodeResult`] whose category is consistent with the loaded
//! [`Taxonomy`].

mod cache;
mod poi;
mod remote;
mod taxonomy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

pub use cache::{cache_key, GeocodeCache};
pub use poi::{load_pois, load_pois_reader, reverse_geocode_offline, write_pois_csv, OfflineGeocoder, Poi, PoiSet, POI_CELL_SIZE_DEG};
pub use remote::{
    Clock, HttpResponse, MockClock, RemoteConfig, RemoteGeocoder, SystemClock, Transport, UreqTransport,
};
pub use taxonomy::{load_taxonomy, Taxonomy, UNKNOWN, EXPECTED_CATEGORIES, MAX_TYPES};

#[derive(Debug, Error)]
pub enum GeocodeError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("taxonomy line {line}: {message}")]
    TaxonomyParse { line: usize, message: String },
    #[error("taxonomy line {line}: type {osm_type:?} listed twice")]
    DuplicateType { line: usize, osm_type: String },
    #[error("taxonomy must define exactly {expected} categories, found {found}")]
    CategoryCount { expected: usize, found: usize },
    #[error("taxonomy defines {0} types, more than the supported maximum")]
    TooManyTypes(usize),
    #[error("POI file row {row}: {message}")]
    MalformedRow { row: usize, message: String },
    #[error("POI file has no data rows")]
    EmptyFile,
    #[error("no POIs to search")]
    NoPois,
    #[error("network error after {attempts} attempts: {message}")]
    Network { attempts: usize, message: String },
    #[error("HTTP status {status} after {attempts} attempts")]
    Http { status: u16, attempts: usize },
    #[error("rate limited by server after {attempts} attempts")]
    RateLimited { attempts: usize },
    #[error("unparseable response body: {0}")]
    Body(String),
    #[error("service returned no result: {0}")]
    NoResult(String),
    #[error("cache {path}: {message}")]
    Cache { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeocodeSource {
    Offline,
    Remote,
    Cache,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeocodeResult {
    pub osm_type: String,
    pub osm_category: String,
    pub source: GeocodeSource,
    /// Distance to the resolved POI; only known on the offline path.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_km: Option<f64>,
}

/// Anything that can reverse-geocode a point. Implementations are safe to
/// share across threads.
pub trait Geocoder: Send + Sync {
    fn reverse(&self, p: GeoPoint) -> Result<GeocodeResult, GeocodeError>;
}
