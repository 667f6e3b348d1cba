use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crimespot::dataset::{
    class_balance, derive_label, generate_synthetic, parse_ucr_csv, write_ucr_csv, CrimeCategory, CrimeRecord, LabelRules,
};
use crimespot::evaluation::{render_details, render_tables, run_experiment_with_hotpoints, EvalReport, ExperimentConfig};
use crimespot::features::{build_engineered, build_raw, fit_plan, FeatureMatrix};
use crimespot::geocoding::{load_pois, load_taxonomy, write_pois_csv, GeocodeCache, Geocoder, OfflineGeocoder, RemoteGeocoder, Taxonomy, UNKNOWN};
use crimespot::hotspots::{build_hotspots, extract_hotpoints, hotpoints_geojson, hotspots_geojson, years_of, HotpointSet};
use crimespot::models::{EnsembleModel, ModelDocument, SavedModel};

use crate::config::{require_file, GeocoderMode, PipelineConfig};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration; exit code 64.
    Usage(String),
    /// A pipeline stage failed; exit code 2.
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 64,
            CliError::Pipeline(_) => 2,
        }
    }
}

impl Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Pipeline(m) => f.write_str(m),
        }
    }
}

pub type CmdResult = Result<(), CliError>;

fn fail(e: impl Display) -> CliError {
    CliError::Pipeline(e.to_string())
}

fn input(path: &Path) -> Result<(), CliError> {
    require_file(path).map_err(CliError::Usage)
}

fn write_text(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| fail(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| fail(format!("{}: {e}", dir.display())))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn json_text(value: &impl serde::Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn taxonomy(cfg: &PipelineConfig) -> Result<Taxonomy, CliError> {
    match &cfg.paths.taxonomy {
        Some(p) => load_taxonomy(p).map_err(fail),
        None => Ok(Taxonomy::default()),
    }
}

fn label_rules(cfg: &PipelineConfig) -> Result<LabelRules, CliError> {
    match &cfg.paths.label_rules {
        Some(p) => LabelRules::from_csv_path(p).map_err(fail),
        None => Ok(LabelRules::default()),
    }
}

fn records(path: &Path) -> Result<Vec<CrimeRecord>, CliError> {
    input(path)?;
    let parsed = parse_ucr_csv(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
    if !parsed.rejects.is_empty() {
        log::warn!("{}: skipped {} malformed rows", path.display(), parsed.rejects.len());
    }
    Ok(parsed.records)
}

fn geocoder(cfg: &PipelineConfig, taxonomy: &Taxonomy) -> Result<Box<dyn Geocoder>, CliError> {
    let remote = cfg.geocoder.remote.clone();
    Ok(match cfg.geocoder.mode {
        GeocoderMode::Offline => {
            let path = cfg.paths.pois.as_ref().ok_or_else(|| CliError::Usage("offline geocoding needs paths.pois".into()))?;
            input(path)?;
            Box::new(OfflineGeocoder::new(load_pois(path, taxonomy).map_err(fail)?))
        }
        GeocoderMode::Remote => Box::new(RemoteGeocoder::with_defaults(remote, taxonomy.clone(), None)),
        GeocoderMode::CachedRemote => {
            let cache = GeocodeCache::open(cfg.paths.geocode_cache.clone().expect("validated")).map_err(fail)?;
            Box::new(RemoteGeocoder::with_defaults(remote, taxonomy.clone(), Some(cache)))
        }
    })
}

fn out(cfg: &PipelineConfig, name: String) -> PathBuf {
    cfg.paths.output_dir.join(name)
}

pub fn artifact_path(cfg: &PipelineConfig, c: CrimeCategory) -> PathBuf {
    out(cfg, format!("hotpoints_{}.cshp", c.key()))
}

/// The target's hotpoints, plus every other category's when all distance
/// columns are requested.
fn load_hotpoints(cfg: &PipelineConfig, category: CrimeCategory) -> Result<Vec<HotpointSet>, CliError> {
    let cats = if cfg.features.all_category_distances { CrimeCategory::ALL.to_vec() } else { vec![category] };
    cats.into_iter()
        .map(|c| {
            let path = artifact_path(cfg, c);
            let file = File::open(&path)
                .map_err(|e| fail(format!("{}: {e} (run `crimespot hotspots --category {c}` first)", path.display())))?;
            HotpointSet::read_artifact(std::io::BufReader::new(file)).map_err(|e| fail(format!("{}: {e}", path.display())))
        })
        .collect()
}

pub fn synth(cfg: &PipelineConfig) -> CmdResult {
    let tax = taxonomy(cfg)?;
    let data = generate_synthetic(&cfg.synth, &tax).map_err(fail)?;
    let pois_path = cfg.paths.pois.as_ref().ok_or_else(|| CliError::Usage("synth needs paths.pois as its POI output".into()))?;
    let periods = [(&cfg.paths.train, &data.period_a, cfg.synth.years[0]), (&cfg.paths.eval, &data.period_b, cfg.synth.years[1])];
    for (path, recs, year) in periods {
        write_ucr_csv(recs, create(path)?).map_err(fail)?;
        println!("synth: {} records ({year}) -> {}", recs.len(), path.display());
    }
    let mut w = create(pois_path)?;
    write_pois_csv(&data.pois, &mut w).map_err(fail)?;
    drop(w);
    println!("synth: {} POIs -> {}", data.pois.len(), pois_path.display());
    let truth = out(cfg, "ground_truth.json".into());
    write_text(&truth, &json_text(&data.ground_truth))?;
    println!("synth: {} zones -> {}", data.ground_truth.zones.len(), truth.display());
    Ok(())
}

pub fn ingest(cfg: &PipelineConfig) -> CmdResult {
    let rules = label_rules(cfg)?;
    for path in [&cfg.paths.train, &cfg.paths.eval] {
        input(path)?;
        let parsed = parse_ucr_csv(path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        let years: Vec<String> = years_of(&parsed.records).iter().map(i32::to_string).collect();
        println!(
            "{}: {} rows, {} accepted, {} rejected, years {}",
            path.display(),
            parsed.total_rows(),
            parsed.records.len(),
            parsed.rejects.len(),
            years.join("+")
        );
        for r in &parsed.rejects {
            println!("  reject row {} (id {:?}): {}", r.row, r.id, r.reason);
        }
        if parsed.records.is_empty() {
            continue;
        }
        for c in CrimeCategory::ALL {
            let (p, _) = class_balance(&parsed.records, c, &rules).map_err(fail)?;
            println!("  {:<16} {:>6.2}% positive", c.key(), 100.0 * p);
        }
    }
    Ok(())
}

pub fn pois(cfg: &PipelineConfig) -> CmdResult {
    let tax = taxonomy(cfg)?;
    let path = cfg.paths.pois.as_ref().ok_or_else(|| CliError::Usage("paths.pois is not set".into()))?;
    input(path)?;
    let set = load_pois(path, &tax).map_err(fail)?;
    println!("{}: {} POIs in {} grid cells", path.display(), set.pois.len(), set.index.bucket_count());
    let mut per_category: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &set.pois {
        *per_category.entry(p.osm_category.as_str()).or_default() += 1;
    }
    for (c, n) in &per_category {
        println!("  {c:<16} {n:>6}");
    }
    let unknown = per_category.get(UNKNOWN).copied().unwrap_or(0);
    if unknown > 0 {
        log::warn!("{unknown} POIs have types outside the taxonomy");
    }
    Ok(())
}

pub fn hotspots(cfg: &PipelineConfig) -> CmdResult {
    let category = cfg.category().map_err(CliError::Usage)?;
    let rules = label_rules(cfg)?;
    let train = records(&cfg.paths.train)?;
    let positives = train.iter().filter(|r| derive_label(r, category, &rules)).count();
    let hs = build_hotspots(&train, category, &rules, &cfg.hdbscan.params(category)).map_err(fail)?;
    let set = extract_hotpoints(&hs, category, &years_of(&train)).map_err(fail)?;

    let key = category.key();
    write_text(&out(cfg, format!("hotspots_{key}.geojson")), &json_text(&hotspots_geojson(&hs)))?;
    write_text(&out(cfg, format!("hotpoints_{key}.geojson")), &json_text(&hotpoints_geojson(&set)))?;
    let mut artifact = Vec::new();
    set.write_artifact(&mut artifact).map_err(fail)?;
    std::fs::write(artifact_path(cfg, category), artifact).map_err(fail)?;

    let clustered: usize = hs.iter().map(|h| h.members.len()).sum();
    let noise = if positives == 0 { 0.0 } else { 1.0 - clustered as f64 / positives as f64 };
    println!("hotspots {key}: {} clusters from {positives} positives ({}), noise fraction {noise:.3}", hs.len(), set.training_period);
    if set.is_empty() {
        log::warn!("no hotspots found for {key}; its distance feature will be MISSING for every record");
    }
    Ok(())
}

/// Raw and engineered matrices of the evaluation period, with the plan fitted
/// on it.
fn matrices(cfg: &PipelineConfig, category: CrimeCategory) -> Result<(FeatureMatrix, FeatureMatrix, String), CliError> {
    let tax = taxonomy(cfg)?;
    let rules = label_rules(cfg)?;
    let eval = records(&cfg.paths.eval)?;
    let hotpoints = load_hotpoints(cfg, category)?;
    let geo = geocoder(cfg, &tax)?;
    let plan = fit_plan(&eval, category, &hotpoints, geo.as_ref(), &tax, cfg.features).map_err(fail)?;
    let raw = build_raw(&eval, category, &rules).map_err(fail)?;
    let engineered = build_engineered(&eval, &rules, &plan, geo.as_ref()).map_err(fail)?;
    Ok((raw, engineered, json_text(&plan)))
}

pub fn featurize(cfg: &PipelineConfig) -> CmdResult {
    let category = cfg.category().map_err(CliError::Usage)?;
    let (raw, engineered, plan) = matrices(cfg, category)?;
    let key = category.key();
    for m in [&raw, &engineered] {
        let path = out(cfg, format!("features_{key}_{}.csv", m.feature_set.key()));
        m.write_csv(create(&path)?).map_err(fail)?;
        println!("featurize {key}: {} rows x {} columns -> {}", m.n_rows(), m.n_cols(), path.display());
    }
    write_text(&out(cfg, format!("feature_plan_{key}.json")), &plan)?;
    Ok(())
}

pub fn train(cfg: &PipelineConfig) -> CmdResult {
    let category = cfg.category().map_err(CliError::Usage)?;
    let (raw, engineered, _) = matrices(cfg, category)?;
    let params = cfg.models.with_seed(cfg.seed());
    let key = category.key();
    for m in [&raw, &engineered] {
        let model = EnsembleModel::fit(&m.rows, &m.labels, &params).map_err(fail)?;
        let docs = [
            ("lr", SavedModel::Lr(model.lr.clone())),
            ("svm", SavedModel::Svm(model.svm.clone())),
            ("rf", SavedModel::Rf(model.rf.clone())),
            ("ensemble", SavedModel::Ensemble(model)),
        ];
        for (name, saved) in docs {
            let path = out(cfg, format!("model_{key}_{}_{name}.json", m.feature_set.key()));
            let mut text = ModelDocument::new(saved, m.column_names.clone()).to_json();
            text.push('\n');
            write_text(&path, &text)?;
            println!("train {key}: {name} on {} features -> {}", m.feature_set.key(), path.display());
        }
    }
    Ok(())
}

pub fn eval(cfg: &PipelineConfig) -> CmdResult {
    let category = cfg.category().map_err(CliError::Usage)?;
    let tax = taxonomy(cfg)?;
    let rules = label_rules(cfg)?;
    input(&cfg.paths.train)?;
    let eval = records(&cfg.paths.eval)?;
    let hotpoints = load_hotpoints(cfg, category)?;
    let geo = geocoder(cfg, &tax)?;
    let config = ExperimentConfig {
        k: cfg.evaluation.k,
        seed: cfg.seed(),
        alpha: cfg.evaluation.alpha,
        hdbscan: cfg.hdbscan.params(category),
        models: cfg.models,
        features: cfg.features,
    };
    let report = run_experiment_with_hotpoints(&hotpoints, &eval, category, &rules, geo.as_ref(), &tax, &config).map_err(fail)?;
    let text = render_details(&report).map_err(fail)?;
    let key = category.key();
    write_text(&out(cfg, format!("eval_{key}.json")), &report.to_json())?;
    write_text(&out(cfg, format!("eval_{key}.txt")), &text)?;
    print!("{text}");
    Ok(())
}

pub fn report(paths: &[PathBuf], output: Option<&Path>) -> CmdResult {
    let reports = paths
        .iter()
        .map(|p| {
            input(p)?;
            let text = std::fs::read_to_string(p).map_err(|e| fail(format!("{}: {e}", p.display())))?;
            EvalReport::from_json(&text).map_err(|e| fail(format!("{}: {e}", p.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let text = render_tables(&reports).map_err(fail)?;
    if let Some(path) = output {
        write_text(path, &text)?;
    }
    print!("{text}");
    Ok(())
}
