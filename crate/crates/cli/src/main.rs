//! `modesub`: file-driven runs of the demand and substitution pipeline.
//!
//! Exit status is 0 on success, 1 on bad input or usage, 2 on numerical
//! failure. Diagnostics go to stderr.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "modesub", version, about = "E-scooter demand and mode-substitution modelling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand except `synth`.
#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat `key = value` file; keys are long flag names. Flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Where to write the run manifest (defaults next to the primary output).
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct FitDemandArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// `zone_id,<observed-column>` ridership file.
    #[arg(long)]
    pub observed: Option<PathBuf>,
    #[arg(long)]
    pub observed_column: Option<String>,
    /// JSON model specification; the four-term standard model when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Keep every predictor instead of backward elimination.
    #[arg(long)]
    pub no_select: bool,
    #[arg(long)]
    pub collinearity_threshold: Option<f64>,
    #[arg(long)]
    pub system: Option<String>,
    /// Free-form timestamp to record in the model metadata.
    #[arg(long)]
    pub timestamp: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct PredictArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CrosswalkArgs {
    #[command(flatten)]
    pub common: Common,
    /// `zone_id,<column>` file in the source zoning.
    #[arg(long)]
    pub values: Option<PathBuf>,
    #[arg(long)]
    pub column: Option<String>,
    /// `extensive` or `intensive`; inferred from the column name when omitted.
    #[arg(long)]
    pub kind: Option<String>,
    /// `source_zone,target_zone,weight` file.
    #[arg(long)]
    pub crosswalk: Option<PathBuf>,
    /// Source-zone population, needed for intensive attributes.
    #[arg(long)]
    pub population: Option<PathBuf>,
    #[arg(long)]
    pub population_column: Option<String>,
    #[arg(long)]
    pub source_system: Option<String>,
    #[arg(long)]
    pub target_system: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
    #[arg(long)]
    pub trips: Option<PathBuf>,
    #[arg(long)]
    pub access: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct FitFactorArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub data: DataArgs,
    /// `shared` or `per-bin`.
    #[arg(long)]
    pub beta_mode: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random starts after the deterministic one.
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub transit_mode: Option<String>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Number of one-mile distance bins.
    #[arg(long)]
    pub bins: Option<usize>,
    /// Comma-separated bin edges in miles, starting at 0; overrides `--bins`.
    #[arg(long)]
    pub bin_edges: Option<String>,
    /// Comma-separated accepted mode labels, in matrix order.
    #[arg(long)]
    pub modes: Option<String>,
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub common: Common,
    /// Fitted factor model written by `fit-factor`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Override the data files recorded in the model.
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub ci: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the model with its bootstrap block here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub trips: Option<PathBuf>,
    #[arg(long)]
    pub access: Option<PathBuf>,
    #[arg(long)]
    pub fare_base: Option<f64>,
    #[arg(long)]
    pub fare_per_minute: Option<f64>,
    #[arg(long)]
    pub speed_mph: Option<f64>,
    #[arg(long)]
    pub avg_duration_min: Option<f64>,
    /// `zone_id,feature_id` file; enables the per-zone GeoJSON property table.
    #[arg(long)]
    pub feature_map: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SynthArgs {
    /// JSON scenario: a full scenario or overrides of the standard one.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub observed: Option<PathBuf>,
    #[arg(long)]
    pub observed_column: Option<String>,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub crosswalk: Option<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub bin_edges: Option<String>,
    #[arg(long)]
    pub modes: Option<String>,
    #[arg(long)]
    pub system: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit the log-log trip-generation model.
    FitDemand(FitDemandArgs),
    /// Forecast ridership for new zones from a fitted demand model.
    Predict(PredictArgs),
    /// Move a zonal attribute onto another zoning system.
    Crosswalk(CrosswalkArgs),
    /// Calibrate the mode-substitution model.
    FitFactor(FitFactorArgs),
    /// Zone-resampling standard errors and intervals for a fitted factor model.
    Bootstrap(BootstrapArgs),
    /// Substitution shares and revenue for a fitted factor model.
    Analyze(AnalyzeArgs),
    /// Write a synthetic scenario in the input CSV formats.
    Synth(SynthArgs),
    /// Check input files without writing anything.
    Validate(ValidateArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::FitDemand(a) => commands::fit_demand(a),
        Command::Predict(a) => commands::predict(a),
        Command::Crosswalk(a) => commands::crosswalk(a),
        Command::FitFactor(a) => commands::fit_factor(a),
        Command::Bootstrap(a) => commands::bootstrap(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Synth(a) => commands::synth(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
