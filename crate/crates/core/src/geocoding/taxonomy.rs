use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::GeocodeError;

/// Category reserved for types missing from the taxonomy.
pub const UNKNOWN: &str = "unknown";
pub const EXPECTED_CATEGORIES: usize = 12;
pub const MAX_TYPES: usize = 108;

const DEFAULT_TAXONOMY: &str = include_str!("../../../../config/taxonomy.csv");

/// OSM location type → OSM category.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    type_to_category: BTreeMap<String, String>,
    categories: BTreeSet<String>,
}

impl Taxonomy {
    pub fn from_csv_str(text: &str) -> Result<Self, GeocodeError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "osm_type,osm_category")) => {}
            Some((line, _)) => return Err(GeocodeError::TaxonomyParse { line, message: "header must be `osm_type,osm_category`".into() }),
            None => return Err(GeocodeError::TaxonomyParse { line: 1, message: "empty file".into() }),
        }
        let mut type_to_category = BTreeMap::new();
        for (line, l) in lines {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            let [osm_type, category] = fields[..] else {
                return Err(GeocodeError::TaxonomyParse { line, message: format!("expected 2 fields, found {}", fields.len()) });
            };
            if osm_type.is_empty() || category.is_empty() {
                return Err(GeocodeError::TaxonomyParse { line, message: "empty field".into() });
            }
            if category == UNKNOWN {
                return Err(GeocodeError::TaxonomyParse { line, message: format!("category {UNKNOWN:?} is reserved") });
            }
            if type_to_category.insert(osm_type.to_string(), category.to_string()).is_some() {
                return Err(GeocodeError::DuplicateType { line, osm_type: osm_type.to_string() });
            }
        }
        if type_to_category.len() > MAX_TYPES {
            return Err(GeocodeError::TooManyTypes(type_to_category.len()));
        }
        let categories: BTreeSet<String> = type_to_category.values().cloned().collect();
        if categories.len() != EXPECTED_CATEGORIES {
            return Err(GeocodeError::CategoryCount { expected: EXPECTED_CATEGORIES, found: categories.len() });
        }
        Ok(Taxonomy { type_to_category, categories })
    }

    /// Category of `osm_type`, or [`UNKNOWN`].
    pub fn category_of(&self, osm_type: &str) -> &str {
        self.type_to_category.get(osm_type).map(String::as_str).unwrap_or(UNKNOWN)
    }

    pub fn contains_type(&self, osm_type: &str) -> bool {
        self.type_to_category.contains_key(osm_type)
    }

    pub fn is_category(&self, name: &str) -> bool {
        self.categories.contains(name)
    }

    /// Sorted; excludes [`UNKNOWN`].
    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(String::as_str)
    }

    /// Sorted.
    pub fn types(&self) -> impl Iterator<Item = &str> {
        self.type_to_category.keys().map(String::as_str)
    }

    pub fn type_count(&self) -> usize {
        self.type_to_category.len()
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Taxonomy::from_csv_str(DEFAULT_TAXONOMY).expect("shipped taxonomy is valid")
    }
}

pub fn load_taxonomy(path: &Path) -> Result<Taxonomy, GeocodeError> {
    let text = std::fs::read_to_string(path).map_err(|source| GeocodeError::Io { path: path.display().to_string(), source })?;
    Taxonomy::from_csv_str(&text)
}
