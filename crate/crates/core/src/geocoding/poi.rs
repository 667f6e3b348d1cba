use std::io::{Read, Write};
use std::path::Path;

use super::{GeocodeError, GeocodeResult, GeocodeSource, Geocoder, Taxonomy};
use crate::dataset::PoiRow;
use crate::geo::{EarthModel, GeoPoint, GridIndex};

pub const POI_CELL_SIZE_DEG: f64 = 0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct Poi {
    pub id: u64,
    pub location: GeoPoint,
    pub osm_type: String,
    pub osm_category: String,
}

/// POIs with a grid index over them. Index ids are positions in `pois`.
#[derive(Debug, Clone)]
pub struct PoiSet {
    pub pois: Vec<Poi>,
    pub index: GridIndex,
}

impl PoiSet {
    pub fn new(pois: Vec<Poi>) -> Self {
        let index = GridIndex::build(pois.iter().enumerate().map(|(i, p)| (i, p.location)), POI_CELL_SIZE_DEG)
            .expect("constant cell size is valid");
        PoiSet { pois, index }
    }
}

/// Reads `id,lat,lon,osm_type`. Types missing from the taxonomy are kept
/// under the "unknown" category.
pub fn load_pois(path: &Path, taxonomy: &Taxonomy) -> Result<PoiSet, GeocodeError> {
    let file = std::fs::File::open(path).map_err(|source| GeocodeError::Io { path: path.display().to_string(), source })?;
    load_pois_reader(file, taxonomy)
}

pub fn load_pois_reader(reader: impl Read, taxonomy: &Taxonomy) -> Result<PoiSet, GeocodeError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| GeocodeError::MalformedRow { row: 0, message: e.to_string() })?.clone();
    if headers.iter().collect::<Vec<_>>() != ["id", "lat", "lon", "osm_type"] {
        return Err(GeocodeError::MalformedRow { row: 0, message: "header must be `id,lat,lon,osm_type`".into() });
    }
    let mut pois = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let bad = |message: String| GeocodeError::MalformedRow { row: row_no, message };
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", row.len())));
        }
        let id: u64 = row[0].parse().map_err(|_| bad(format!("id {:?} is not an unsigned integer", &row[0])))?;
        let lat: f64 = row[1].parse().map_err(|_| bad("latitude is not a number".into()))?;
        let lon: f64 = row[2].parse().map_err(|_| bad("longitude is not a number".into()))?;
        let location = GeoPoint::new(lat, lon).map_err(|e| bad(e.to_string()))?;
        let osm_type = row[3].to_string();
        if osm_type.is_empty() {
            return Err(bad("empty osm_type".into()));
        }
        let osm_category = taxonomy.category_of(&osm_type).to_string();
        pois.push(Poi { id, location, osm_type, osm_category });
    }
    if pois.is_empty() {
        return Err(GeocodeError::EmptyFile);
    }
    Ok(PoiSet::new(pois))
}

pub fn write_pois_csv(rows: &[PoiRow], writer: impl Write) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["id", "lat", "lon", "osm_type"])?;
    for r in rows {
        w.write_record([r.id.to_string(), r.location.lat().to_string(), r.location.lon().to_string(), r.osm_type.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Nearest POI by haversine distance (ties to the earlier POI).
pub fn reverse_geocode_offline(p: GeoPoint, pois: &[Poi], index: &GridIndex) -> Result<GeocodeResult, GeocodeError> {
    if pois.is_empty() || index.is_empty() {
        return Err(GeocodeError::NoPois);
    }
    let (i, d) = index.nearest(p, EarthModel::default()).map_err(|_| GeocodeError::NoPois)?;
    let poi = &pois[i];
    Ok(GeocodeResult {
        osm_type: poi.osm_type.clone(),
        osm_category: poi.osm_category.clone(),
        source: GeocodeSource::Offline,
        distance_km: Some(d),
    })
}

#[derive(Debug, Clone)]
pub struct OfflineGeocoder {
    set: PoiSet,
}

impl OfflineGeocoder {
    pub fn new(set: PoiSet) -> Self {
        OfflineGeocoder { set }
    }

    pub fn pois(&self) -> &[Poi] {
        &self.set.pois
    }

    pub fn index(&self) -> &GridIndex {
        &self.set.index
    }
}

impl Geocoder for OfflineGeocoder {
    fn reverse(&self, p: GeoPoint) -> Result<GeocodeResult, GeocodeError> {
        reverse_geocode_offline(p, &self.set.pois, &self.set.index)
    }
}
