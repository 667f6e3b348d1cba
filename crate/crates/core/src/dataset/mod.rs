//! UCR-style crime records: parsing, labelling, raw temporal features and a
//! synthetic generator with planted spatial structure.

mod synthetic;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::GeoPoint;

pub use synthetic::{
    generate_synthetic, BoundingBox, CategoryBalances, GroundTruth, LatentAssignment, PoiRow, SyntheticConfig,
    SyntheticDataset, Zone,
};

pub const UCR_HEADER: [&str; 9] =
    ["id", "lat", "lon", "incident_start_time", "month", "weekday", "ucr_description", "alcohol_flag", "year"];

pub const RAW_FEATURE_COUNT: usize = 24 + 12 + 7;

/// Rejected rows above this share make a whole file unusable.
const MAX_REJECT_FRACTION: f64 = 0.5;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("{rejected} of {total} rows rejected (more than half); first: {first}")]
    TooManyRejects { rejected: usize, total: usize, first: String },
    #[error("empty input")]
    Empty,
    #[error("unknown crime category {0:?}")]
    UnknownCategory(String),
    #[error("label rules line {line}: {message}")]
    Rules { line: usize, message: String },
    #[error("label rules define no keywords for {0}")]
    EmptyRules(CrimeCategory),
    #[error("invalid synthetic config: {0}")]
    Config(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TimeOfDay {
    hour: u8,
    minute: u8,
}

impl TimeOfDay {
    pub fn new(hour: u8, minute: u8) -> Option<Self> {
        (hour < 24 && minute < 60).then_some(TimeOfDay { hour, minute })
    }

    pub fn hour(&self) -> u8 {
        self.hour
    }

    pub fn minute(&self) -> u8 {
        self.minute
    }
}

impl FromStr for TimeOfDay {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (h, m) = s.trim().split_once(':').ok_or_else(|| format!("time {s:?} is not HH:MM"))?;
        let hour: u8 = h.parse().map_err(|_| format!("bad hour in {s:?}"))?;
        let minute: u8 = m.parse().map_err(|_| format!("bad minute in {s:?}"))?;
        TimeOfDay::new(hour, minute).ok_or_else(|| format!("time {s:?} out of range"))
    }
}

impl fmt::Display for TimeOfDay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}", self.hour, self.minute)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrimeRecord {
    pub id: String,
    pub location: GeoPoint,
    pub incident_start_time: TimeOfDay,
    pub month: u8,
    /// Monday = 0.
    pub weekday: u8,
    pub ucr_description: String,
    pub alcohol_flag: bool,
    pub year: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrimeCategory {
    AlcoholRelated,
    Assault,
    PropertyDamage,
    MotorVehicle,
}

impl CrimeCategory {
    pub const ALL: [CrimeCategory; 4] =
        [CrimeCategory::AlcoholRelated, CrimeCategory::Assault, CrimeCategory::PropertyDamage, CrimeCategory::MotorVehicle];

    pub fn key(&self) -> &'static str {
        match self {
            CrimeCategory::AlcoholRelated => "alcohol_related",
            CrimeCategory::Assault => "assault",
            CrimeCategory::PropertyDamage => "property_damage",
            CrimeCategory::MotorVehicle => "motor_vehicle",
        }
    }

    /// Row label used in report tables.
    pub fn title(&self) -> &'static str {
        match self {
            CrimeCategory::AlcoholRelated => "Alcohol-related",
            CrimeCategory::Assault => "Assault",
            CrimeCategory::PropertyDamage => "Property damage",
            CrimeCategory::MotorVehicle => "Motor vehicle",
        }
    }

    pub fn index(&self) -> usize {
        *self as usize
    }
}

impl fmt::Display for CrimeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for CrimeCategory {
    type Err = DatasetError;
    fn from_str(s: &str) -> Result<Self, DatasetError> {
        let norm: String = s.trim().to_ascii_lowercase().chars().map(|c| if c == '-' || c == ' ' { '_' } else { c }).collect();
        match norm.as_str() {
            "alcohol_related" | "alcohol" => Ok(CrimeCategory::AlcoholRelated),
            "assault" => Ok(CrimeCategory::Assault),
            "property_damage" | "property" => Ok(CrimeCategory::PropertyDamage),
            "motor_vehicle" | "motor" => Ok(CrimeCategory::MotorVehicle),
            _ => Err(DatasetError::UnknownCategory(s.to_string())),
        }
    }
}

/// Case-insensitive description keywords for the description-driven
/// categories. Alcohol-related uses the record's alcohol flag instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRules {
    keywords: BTreeMap<CrimeCategory, Vec<String>>,
}

const DEFAULT_LABEL_RULES: &str = include_str!("../../../../config/label_rules.csv");

impl LabelRules {
    pub fn new(keywords: BTreeMap<CrimeCategory, Vec<String>>) -> Result<Self, DatasetError> {
        let keywords: BTreeMap<_, Vec<String>> =
            keywords.into_iter().map(|(c, ks)| (c, ks.into_iter().map(|k| k.trim().to_lowercase()).filter(|k| !k.is_empty()).collect())).collect();
        for c in [CrimeCategory::Assault, CrimeCategory::PropertyDamage, CrimeCategory::MotorVehicle] {
            if keywords.get(&c).is_none_or(Vec::is_empty) {
                return Err(DatasetError::EmptyRules(c));
            }
        }
        Ok(LabelRules { keywords })
    }

    /// Parses `category,keyword` rows (header required).
    pub fn from_csv_str(text: &str) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["category", "keyword"] {
            return Err(DatasetError::Rules { line: 1, message: "header must be `category,keyword`".into() });
        }
        let mut keywords: BTreeMap<CrimeCategory, Vec<String>> = BTreeMap::new();
        for (i, row) in rdr.records().enumerate() {
            let line = i + 2;
            let row = row.map_err(|e| DatasetError::Rules { line, message: e.to_string() })?;
            let category: CrimeCategory = row[0].parse().map_err(|e: DatasetError| DatasetError::Rules { line, message: e.to_string() })?;
            if category == CrimeCategory::AlcoholRelated {
                return Err(DatasetError::Rules { line, message: "alcohol_related is labelled by the alcohol flag, not keywords".into() });
            }
            keywords.entry(category).or_default().push(row[1].to_string());
        }
        Self::new(keywords)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, DatasetError> {
        Self::from_csv_str(&std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?)
    }

    pub fn keywords(&self, category: CrimeCategory) -> &[String] {
        self.keywords.get(&category).map(Vec::as_slice).unwrap_or(&[])
    }
}

impl Default for LabelRules {
    fn default() -> Self {
        Self::from_csv_str(DEFAULT_LABEL_RULES).expect("shipped label rules are valid")
    }
}

pub fn derive_label(record: &CrimeRecord, category: CrimeCategory, rules: &LabelRules) -> bool {
    match category {
        CrimeCategory::AlcoholRelated => record.alcohol_flag,
        c => {
            let desc = record.ucr_description.to_lowercase();
            rules.keywords(c).iter().any(|k| desc.contains(k.as_str()))
        }
    }
}

/// `(positive fraction, negative fraction)`.
pub fn class_balance(records: &[CrimeRecord], category: CrimeCategory, rules: &LabelRules) -> Result<(f64, f64), DatasetError> {
    if records.is_empty() {
        return Err(DatasetError::Empty);
    }
    let pos = records.iter().filter(|r| derive_label(r, category, rules)).count();
    let p = pos as f64 / records.len() as f64;
    Ok((p, (records.len() - pos) as f64 / records.len() as f64))
}

/// One-hot hour (24) + month (12) + weekday (7).
pub fn raw_features(record: &CrimeRecord) -> [f64; RAW_FEATURE_COUNT] {
    let mut v = [0.0; RAW_FEATURE_COUNT];
    v[record.incident_start_time.hour() as usize] = 1.0;
    v[24 + record.month as usize - 1] = 1.0;
    v[36 + record.weekday as usize] = 1.0;
    v
}

pub fn raw_feature_names() -> Vec<String> {
    (0..24)
        .map(|h| format!("hour_{h:02}"))
        .chain((1..=12).map(|m| format!("month_{m:02}")))
        .chain((0..7).map(|d| format!("weekday_{d}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reject {
    /// 1-based data row (the header is row 0).
    pub row: usize,
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedUcr {
    pub records: Vec<CrimeRecord>,
    pub rejects: Vec<Reject>,
}

impl ParsedUcr {
    pub fn total_rows(&self) -> usize {
        self.records.len() + self.rejects.len()
    }
}

pub fn parse_ucr_csv(path: &Path) -> Result<ParsedUcr, DatasetError> {
    let file = std::fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    parse_ucr_reader(file)
}

pub fn parse_ucr_reader(reader: impl Read) -> Result<ParsedUcr, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut col = [0usize; 9];
    for (slot, name) in col.iter_mut().zip(UCR_HEADER) {
        *slot = headers.iter().position(|h| h.trim() == name).ok_or_else(|| DatasetError::MissingColumn(name.to_string()))?;
    }

    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejects.push(Reject { row: row_no, id: String::new(), reason: e.to_string() });
                continue;
            }
        };
        let field = |c: usize| row.get(col[c]).map(str::trim);
        match parse_row(&field) {
            Ok(r) => records.push(r),
            Err(reason) => rejects.push(Reject { row: row_no, id: field(0).unwrap_or("").to_string(), reason }),
        }
    }
    let total = records.len() + rejects.len();
    if total > 0 && rejects.len() as f64 > MAX_REJECT_FRACTION * total as f64 {
        let first = rejects.first().map(|r| format!("row {}: {}", r.row, r.reason)).unwrap_or_default();
        return Err(DatasetError::TooManyRejects { rejected: rejects.len(), total, first });
    }
    Ok(ParsedUcr { records, rejects })
}

fn parse_row<'a>(field: &dyn Fn(usize) -> Option<&'a str>) -> Result<CrimeRecord, String> {
    let get = |c: usize| field(c).ok_or_else(|| format!("missing field {}", UCR_HEADER[c]));
    let id = get(0)?.to_string();
    if id.is_empty() {
        return Err("empty id".into());
    }
    let lat: f64 = get(1)?.parse().map_err(|_| "latitude is not a number".to_string())?;
    let lon: f64 = get(2)?.parse().map_err(|_| "longitude is not a number".to_string())?;
    let location = GeoPoint::new(lat, lon).map_err(|e| e.to_string())?;
    let incident_start_time: TimeOfDay = get(3)?.parse()?;
    let month: u8 = get(4)?.parse().map_err(|_| "month is not an integer".to_string())?;
    if !(1..=12).contains(&month) {
        return Err("month out of range".into());
    }
    let weekday: u8 = get(5)?.parse().map_err(|_| "weekday is not an integer".to_string())?;
    if weekday > 6 {
        return Err("weekday out of range".into());
    }
    let ucr_description = get(6)?.to_string();
    let alcohol_flag = match get(7)? {
        "1" => true,
        "0" => false,
        other => return Err(format!("alcohol_flag must be 0 or 1, got {other:?}")),
    };
    let year: i32 = get(8)?.parse().map_err(|_| "year is not an integer".to_string())?;
    Ok(CrimeRecord { id, location, incident_start_time, month, weekday, ucr_description, alcohol_flag, year })
}

pub fn write_ucr_csv(records: &[CrimeRecord], writer: impl Write) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(UCR_HEADER)?;
    for r in records {
        w.write_record([
            r.id.clone(),
            r.location.lat().to_string(),
            r.location.lon().to_string(),
            r.incident_start_time.to_string(),
            r.month.to_string(),
            r.weekday.to_string(),
            r.ucr_description.clone(),
            if r.alcohol_flag { "1" } else { "0" }.to_string(),
            r.year.to_string(),
        ])?;
    }
    w.flush().map_err(|e| DatasetError::Csv(e.into()))?;
    Ok(())
}

pub fn write_ucr_csv_path(records: &[CrimeRecord], path: &Path) -> Result<(), DatasetError> {
    let file = std::fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    write_ucr_csv(records, std::io::BufWriter::new(file))
}
