use thiserror::Error;

use crate::dataset::DatasetError;
use crate::evaluation::EvalError;
use crate::features::FeatureError;
use crate::geo::GeoError;
use crate::geocoding::GeocodeError;
use crate::hdbscan::HdbscanError;
use crate::hotspots::HotspotError;
use crate::models::ModelError;

/// Crate-wide error wrapping every module's error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("clustering: {0}")]
    Hdbscan(#[from] HdbscanError),
    #[error("hotspots: {0}")]
    Hotspot(#[from] HotspotError),
    #[error("geocoding: {0}")]
    Geocode(#[from] GeocodeError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("features: {0}")]
    Feature(#[from] FeatureError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("evaluation: {0}")]
    Eval(#[from] EvalError),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

/// Attaches a pipeline stage name to any module error.
pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T, E: Into<Error>> StageExt<T> for std::result::Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage { stage, source: Box::new(e.into()) })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
