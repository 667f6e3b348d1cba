mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use crimespot::dataset::CrimeCategory;

use commands::{CliError, CmdResult};
use config::{Overrides, PipelineConfig};

/// Crime hotspot features and classifier evaluation.
///
/// Exit codes: 0 success, 64 usage or configuration error, 2 pipeline error.
#[derive(Debug, Parser)]
#[command(name = "crimespot", version)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Target crime category: alcohol_related, assault, property_damage or motor_vehicle.
    #[arg(long, global = true, value_name = "NAME", value_parser = parse_category)]
    category: Option<CrimeCategory>,
    /// Lets hotspot training and evaluation periods share years.
    #[arg(long, global = true)]
    allow_period_overlap: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic dataset: two UCR periods, POIs and ground truth.
    Synth,
    /// Validate both UCR files and list rejected rows.
    Ingest,
    /// Load the POI file and report index statistics.
    Pois,
    /// Cluster the training period into hotspots and write hotpoint artifacts.
    Hotspots,
    /// Write raw and engineered feature matrices for the evaluation period.
    Featurize,
    /// Fit every classifier on the evaluation period and save model JSON.
    Train,
    /// Cross-validate raw against engineered features and write reports.
    Eval,
    /// Merge JSON evaluation reports into accuracy and AUC tables.
    Report {
        /// Evaluation report JSON files.
        #[arg(required = true, value_name = "REPORT")]
        reports: Vec<PathBuf>,
        /// Also write the tables to this file.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

fn parse_category(s: &str) -> Result<CrimeCategory, String> {
    s.parse().map_err(|e: crimespot::dataset::DatasetError| e.to_string())
}

fn run(cli: Cli) -> CmdResult {
    if let Command::Report { reports, out } = &cli.command {
        return commands::report(reports, out.as_deref());
    }
    let path = cli.config.ok_or_else(|| CliError::Usage("--config is required".into()))?;
    let overrides = Overrides { seed: cli.seed, category: cli.category, allow_period_overlap: cli.allow_period_overlap };
    let cfg = PipelineConfig::load(&path, overrides).map_err(CliError::Usage)?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Ingest => commands::ingest(&cfg),
        Command::Pois => commands::pois(&cfg),
        Command::Hotspots => commands::hotspots(&cfg),
        Command::Featurize => commands::featurize(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Report { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
