//! TOML pipeline configuration. Relative paths resolve against the config
//! file's directory.

use std::path::{Path, PathBuf};

use crimespot::dataset::{CrimeCategory, SyntheticConfig};
use crimespot::features::FeatureOptions;
use crimespot::geocoding::RemoteConfig;
use crimespot::hdbscan::{HdbscanParams, Metric};
use crimespot::models::ModelParams;
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Drives the synthetic generator, fold assignment and every model seed.
    pub seed: Option<u64>,
    /// Default for `--category`.
    pub category: Option<CrimeCategory>,
    pub paths: Paths,
    #[serde(default)]
    pub hdbscan: HdbscanSection,
    #[serde(default)]
    pub models: ModelParams,
    #[serde(default)]
    pub evaluation: EvaluationSection,
    #[serde(default)]
    pub features: FeatureOptions,
    #[serde(default)]
    pub geocoder: GeocoderSection,
    #[serde(default)]
    pub synth: SyntheticConfig,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    /// UCR CSV of the hotspot-training period.
    pub train: PathBuf,
    /// UCR CSV of the evaluation period.
    pub eval: PathBuf,
    /// `id,lat,lon,osm_type` file for offline geocoding.
    pub pois: Option<PathBuf>,
    /// Built-in taxonomy when absent.
    pub taxonomy: Option<PathBuf>,
    /// Built-in keyword rules when absent.
    pub label_rules: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Response cache for `cached-remote` geocoding.
    pub geocode_cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterOverride {
    pub min_cluster_size: Option<usize>,
    pub min_samples: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HdbscanSection {
    pub min_cluster_size: usize,
    pub min_samples: Option<usize>,
    pub alcohol_related: Option<ClusterOverride>,
    pub assault: Option<ClusterOverride>,
    pub property_damage: Option<ClusterOverride>,
    pub motor_vehicle: Option<ClusterOverride>,
}

impl Default for HdbscanSection {
    fn default() -> Self {
        HdbscanSection {
            min_cluster_size: HdbscanParams::DEFAULT_MIN_CLUSTER_SIZE,
            min_samples: None,
            alcohol_related: None,
            assault: None,
            property_damage: None,
            motor_vehicle: None,
        }
    }
}

impl HdbscanSection {
    /// Haversine parameters for one category, overrides applied.
    pub fn params(&self, category: CrimeCategory) -> HdbscanParams {
        let o = match category {
            CrimeCategory::AlcoholRelated => self.alcohol_related,
            CrimeCategory::Assault => self.assault,
            CrimeCategory::PropertyDamage => self.property_damage,
            CrimeCategory::MotorVehicle => self.motor_vehicle,
        };
        let mcs = o.and_then(|o| o.min_cluster_size).unwrap_or(self.min_cluster_size);
        let mut p = HdbscanParams::new(mcs, Metric::Haversine);
        p.min_samples = o.and_then(|o| o.min_samples).or(self.min_samples);
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub k: usize,
    pub alpha: f64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection { k: 10, alpha: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeocoderMode {
    #[default]
    Offline,
    Remote,
    CachedRemote,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeocoderSection {
    pub mode: GeocoderMode,
    pub remote: RemoteConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub category: Option<CrimeCategory>,
    pub allow_period_overlap: bool,
}

impl PipelineConfig {
    pub fn load(path: &Path, overrides: Overrides) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base, overrides).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn parse(text: &str, base: &Path, overrides: Overrides) -> Result<Self, String> {
        let mut cfg: PipelineConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.seed = overrides.seed.or(cfg.seed);
        cfg.category = overrides.category.or(cfg.category);
        cfg.features.allow_period_overlap |= overrides.allow_period_overlap;
        cfg.paths.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&mut self) -> Result<(), String> {
        let seed = self.seed.ok_or("seed is required (set `seed` or pass --seed)")?;
        self.synth.seed = seed;
        self.synth.validate().map_err(|e| e.to_string())?;
        if self.evaluation.k < 2 {
            return Err(format!("evaluation.k must be at least 2, got {}", self.evaluation.k));
        }
        if !(self.evaluation.alpha > 0.0 && self.evaluation.alpha < 1.0) {
            return Err(format!("evaluation.alpha must lie in (0, 1), got {}", self.evaluation.alpha));
        }
        for c in CrimeCategory::ALL {
            self.hdbscan.params(c).validate().map_err(|e| format!("hdbscan ({c}): {e}"))?;
        }
        if self.geocoder.mode == GeocoderMode::CachedRemote && self.paths.geocode_cache.is_none() {
            return Err("geocoder mode cached-remote needs paths.geocode_cache".into());
        }
        for p in [&self.paths.taxonomy, &self.paths.label_rules].into_iter().flatten() {
            require_file(p)?;
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.expect("validated")
    }

    pub fn category(&self) -> Result<CrimeCategory, String> {
        self.category.ok_or_else(|| "no category given (set `category` or pass --category)".into())
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        join(&mut self.train);
        join(&mut self.eval);
        join(&mut self.output_dir);
        for p in [&mut self.pois, &mut self.taxonomy, &mut self.label_rules, &mut self.geocode_cache].into_iter().flatten() {
            join(p);
        }
    }
}

/// Input files must exist before a stage starts.
pub fn require_file(path: &Path) -> Result<(), String> {
    if path.is_file() {
        Ok(())
    } else {
        Err(format!("input file {} does not exist", path.display()))
    }
}
