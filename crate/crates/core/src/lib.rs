//! Spatial feature engineering for crime-type classification.
//!
//! The pipeline clusters historical incidents of one crime category into
//! density-based hotspots, reduces each hotspot to a hotpoint, and turns the
//! distance from a new incident to its nearest hotpoint into a feature. A
//! second feature family comes from reverse geocoding incidents against OSM
//! points of interest. Four classifiers are then compared on raw versus
//! engineered features with stratified cross-validation and paired t-tests.

pub mod dataset;
pub mod evaluation;
pub mod features;
pub mod geo;
pub mod geocoding;
pub mod hdbscan;
pub mod hotspots;
pub mod models;

mod error;

pub use error::{Error, Result};
pub(crate) use error::StageExt;
