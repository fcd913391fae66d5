use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use modesub_core::analysis::{self, FareSchedule};
use modesub_core::demand::{self, CollinearityReport, DemandModel, DemandModelSpec, Removal};
use modesub_core::factor::{
    self, BetaMode, BootstrapConfig, BootstrapSummary, FactorConfig, FactorData, FitResult,
};
use modesub_core::ingest::{self, AttributeClass, AttributeKind, ProfileSchema, TripLoadOptions};
use modesub_core::synth::{self, ScenarioConfig};
use modesub_core::{
    validate_trip_matrix, DemandForecast, DistanceBinScheme, Error, ModalTripMatrix, Result,
    TransitAccessProfile, ZoneId,
};
use serde::{Deserialize, Serialize};

use crate::settings::{sha256_file, to_json, FileDigest, RunManifest, Settings};
use crate::{
    AnalyzeArgs, BootstrapArgs, CrosswalkArgs, DataArgs, FitDemandArgs, FitFactorArgs,
    PredictArgs, SynthArgs, ValidateArgs,
};

const DEFAULT_SYSTEM: &str = "taz";
const DEFAULT_OBSERVED_COLUMN: &str = "ridership";

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn sibling_manifest(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Writes the manifest to `explicit`, else `fallback`, else stderr.
fn emit_manifest(
    manifest: &mut RunManifest,
    settings: &Settings,
    explicit: Option<&Path>,
    fallback: Option<PathBuf>,
) -> Result<()> {
    manifest.config = settings.effective.clone();
    let body = to_json(manifest)?;
    match explicit.map(Path::to_path_buf).or(fallback) {
        Some(p) => ingest::write_text(&p, &body),
        None => {
            eprint!("{body}");
            Ok(())
        }
    }
}

fn parse_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

fn resolve_scheme(settings: &mut Settings, bins: Option<usize>, edges: Option<String>) -> Result<DistanceBinScheme> {
    let bins = settings.get("bins", bins, 14)?;
    match settings.optional("bin-edges", edges)? {
        Some(raw) => {
            let edges = parse_list(&raw)
                .iter()
                .map(|e| {
                    e.parse::<f64>()
                        .map_err(|_| Error::Invalid(format!("bad bin edge `{e}`")))
                })
                .collect::<Result<Vec<f64>>>()?;
            DistanceBinScheme::with_midpoints(edges)
        }
        None if bins == 0 => Err(Error::Invalid("--bins must be at least 1".into())),
        None => Ok(DistanceBinScheme::one_mile_bins(bins)),
    }
}

fn resolve_modes(settings: &mut Settings, flag: Option<String>) -> Result<Vec<String>> {
    let default = ingest::DEFAULT_MODES.join(",");
    Ok(parse_list(&settings.get("modes", flag, default)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DemandMetadata {
    tool_version: String,
    timestamp: Option<String>,
    inputs: Vec<FileDigest>,
    alpha: Option<f64>,
    collinearity_threshold: f64,
}

/// Document written by `fit-demand` and read by `predict`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DemandModelDoc {
    model: DemandModel,
    removed: Vec<Removal>,
    collinearity: CollinearityReport,
    metadata: DemandMetadata,
}

pub fn fit_demand(a: FitDemandArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let profiles_path = s.required_path("profiles", a.profiles)?;
    let observed_path = s.required_path("observed", a.observed)?;
    let column = s.get("observed-column", a.observed_column, DEFAULT_OBSERVED_COLUMN.to_string())?;
    let spec_path = s.path("spec", a.spec)?;
    let alpha = s.get("alpha", a.alpha, demand::DEFAULT_ALPHA)?;
    let no_select = s.get("no-select", a.no_select.then_some(true), false)?;
    let threshold = s.get(
        "collinearity-threshold",
        a.collinearity_threshold,
        demand::DEFAULT_COLLINEARITY_THRESHOLD,
    )?;
    let system = s.get("system", a.system, DEFAULT_SYSTEM.to_string())?;
    let timestamp = s.optional("timestamp", a.timestamp)?;
    let out = s.required_path("out", a.out)?;
    s.check_unused()?;

    let mut manifest = RunManifest::new("fit-demand");
    let profiles = ingest::load_zone_profiles(&profiles_path, &ProfileSchema::default(), &system)?;
    let observed = ingest::load_zone_values(&observed_path, &column, &system)?;
    manifest.input(&profiles_path)?;
    manifest.input(&observed_path)?;
    let spec: DemandModelSpec = match &spec_path {
        Some(p) => {
            manifest.input(p)?;
            read_json(p)?
        }
        None => DemandModelSpec::standard(),
    };

    let collinearity = demand::screen_collinearity(&profiles, &spec, threshold)?;
    for pair in &collinearity.pairs {
        eprintln!(
            "warning: predictors `{}` and `{}` are correlated (r = {:.3})",
            pair.first, pair.second, pair.r
        );
    }
    for name in &collinearity.degenerate {
        eprintln!("warning: predictor `{name}` is constant across zones");
    }
    let (model, removed) = if no_select {
        (demand::fit_ols(&profiles, &observed, &spec)?, Vec::new())
    } else {
        let sel = demand::backward_select(&profiles, &observed, &spec, alpha)?;
        (sel.model, sel.removed)
    };
    for r in &removed {
        eprintln!("removed `{}` (p = {:.4})", r.predictor, r.p_value);
    }
    print!("{}", model.summary());

    let doc = DemandModelDoc {
        model,
        removed,
        collinearity,
        metadata: DemandMetadata {
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp,
            inputs: manifest.inputs.clone(),
            alpha: (!no_select).then_some(alpha),
            collinearity_threshold: threshold,
        },
    };
    ingest::write_text(&out, &to_json(&doc)?)?;
    manifest.output(&out)?;
    emit_manifest(&mut manifest, &s, a.common.manifest.as_deref(), Some(sibling_manifest(&out)))
}

pub fn predict(a: PredictArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let model_path = s.required_path("model", a.model)?;
    let profiles_path = s.required_path("profiles", a.profiles)?;
    let system = s.get("system", a.system, DEFAULT_SYSTEM.to_string())?;
    let out = s.required_path("out", a.out)?;
    s.check_unused()?;

    let mut manifest = RunManifest::new("predict");
    let doc: DemandModelDoc = read_json(&model_path)?;
    let profiles = ingest::load_zone_profiles(&profiles_path, &ProfileSchema::default(), &system)?;
    manifest.input(&model_path)?;
    manifest.input(&profiles_path)?;
    let forecasts = demand::predict(&doc.model, &profiles)?;
    ingest::write_forecasts(&out, &forecasts)?;
    eprintln!(
        "{} zones, {} trips/day in total",
        forecasts.len(),
        ingest::format_sig6(forecasts.iter().map(|f| f.trips).sum())
    );
    manifest.output(&out)?;
    emit_manifest(&mut manifest, &s, a.common.manifest.as_deref(), Some(sibling_manifest(&out)))
}

pub fn crosswalk(a: CrosswalkArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let values_path = s.required_path("values", a.values)?;
    let column = s.required::<String>("column", a.column)?;
    let kind_raw = s.optional::<String>("kind", a.kind)?;
    let cw_path = s.required_path("crosswalk", a.crosswalk)?;
    let pop_path = s.path("population", a.population)?;
    let pop_column = s.get("population-column", a.population_column, "population".to_string())?;
    let source = s.get("source-system", a.source_system, DEFAULT_SYSTEM.to_string())?;
    let target = s.get("target-system", a.target_system, "target".to_string())?;
    let out = s.required_path("out", a.out)?;
    s.check_unused()?;

    let kind = match kind_raw.as_deref() {
        None => AttributeKind::infer(&column),
        Some("extensive") => AttributeKind {
            name: column.clone(),
            class: AttributeClass::Extensive,
        },
        Some("intensive") => AttributeKind {
            name: column.clone(),
            class: AttributeClass::Intensive,
        },
        Some(other) => {
            return Err(Error::Invalid(format!(
                "--kind must be `extensive` or `intensive`, got `{other}`"
            )))
        }
    };
    let mut manifest = RunManifest::new("crosswalk");
    let values = ingest::load_zone_values(&values_path, &column, &source)?;
    let entries = ingest::load_crosswalk(&cw_path, &source, &target)?;
    manifest.input(&values_path)?;
    manifest.input(&cw_path)?;
    let population = match &pop_path {
        Some(p) => {
            manifest.input(p)?;
            Some(ingest::load_zone_values(p, &pop_column, &source)?)
        }
        None => None,
    };
    let transfer = ingest::crosswalk_transfer(&values, &kind, &entries, population.as_ref())?;
    for w in &transfer.warnings {
        eprintln!("warning: {w}");
    }
    ingest::write_zone_values(&out, &column, transfer.values.iter().map(|(z, v)| (z, *v)))?;
    manifest.output(&out)?;
    emit_manifest(&mut manifest, &s, a.common.manifest.as_deref(), Some(sibling_manifest(&out)))
}

/// Input files a factor model was fitted on, with their digests.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FactorInputs {
    forecasts: FileDigest,
    trips: FileDigest,
    access: Option<FileDigest>,
    modes: Vec<String>,
    system: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ParameterRow {
    name: String,
    estimate: f64,
    lower_bound: f64,
    /// Absent when unbounded.
    upper_bound: Option<f64>,
}

/// Document written by `fit-factor`, extended by `bootstrap`, read by `analyze`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct FactorModelDoc {
    parameters: Vec<ParameterRow>,
    fit: FitResult,
    scheme: DistanceBinScheme,
    config: FactorConfig,
    inputs: FactorInputs,
    bootstrap: Option<BootstrapSummary>,
}

struct LoadedData {
    forecasts: Vec<DemandForecast>,
    trips: ModalTripMatrix,
    access: Vec<TransitAccessProfile>,
}

fn load_factor_inputs(
    forecasts: &Path,
    trips: &Path,
    access: Option<&Path>,
    scheme: &DistanceBinScheme,
    modes: &[String],
    system: &str,
) -> Result<LoadedData> {
    let forecasts = ingest::load_forecasts(forecasts, system)?;
    let options = TripLoadOptions {
        modes: modes.to_vec(),
        zones: Some(forecasts.iter().map(|f| f.zone.clone()).collect()),
        system: system.to_string(),
    };
    let trips = ingest::load_trip_matrix(trips, scheme, &options)?;
    let violations = validate_trip_matrix(&trips);
    if let Some(v) = violations.first() {
        return Err(Error::Invalid(format!(
            "trip matrix has {} invalid cell(s), first: {:?}",
            violations.len(),
            v
        )));
    }
    let access = match access {
        Some(p) => ingest::load_transit_access(p, system)?,
        None => Vec::new(),
    };
    Ok(LoadedData {
        forecasts,
        trips,
        access,
    })
}

pub fn fit_factor(a: FitFactorArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let forecasts_path = s.required_path("forecasts", a.data.forecasts)?;
    let trips_path = s.required_path("trips", a.data.trips)?;
    let access_path = s.path("access", a.data.access)?;
    let beta_mode = match s.get("beta-mode", a.beta_mode, "shared".to_string())?.as_str() {
        "shared" => BetaMode::Shared,
        "per-bin" => BetaMode::PerBin,
        other => {
            return Err(Error::Invalid(format!(
                "--beta-mode must be `shared` or `per-bin`, got `{other}`"
            )))
        }
    };
    let seed = s.get("seed", a.seed, 0u64)?;
    let starts = s.get("starts", a.starts, factor::DEFAULT_MULTI_STARTS)?;
    let transit_mode = s.get("transit-mode", a.transit_mode, factor::DEFAULT_TRANSIT_MODE.to_string())?;
    let defaults = FactorConfig::default();
    let max_iterations = s.get("max-iterations", a.max_iterations, defaults.solver.max_iterations)?;
    let scheme = resolve_scheme(&mut s, a.bins, a.bin_edges)?;
    let modes = resolve_modes(&mut s, a.modes)?;
    let system = s.get("system", a.system, DEFAULT_SYSTEM.to_string())?;
    let out = s.required_path("out", a.out)?;
    s.check_unused()?;

    let mut manifest = RunManifest::new("fit-factor");
    manifest.seed = Some(seed);
    let data = load_factor_inputs(&forecasts_path, &trips_path, access_path.as_deref(), &scheme, &modes, &system)?;
    let inputs = FactorInputs {
        forecasts: FileDigest::of(&forecasts_path)?,
        trips: FileDigest::of(&trips_path)?,
        access: access_path.as_deref().map(FileDigest::of).transpose()?,
        modes,
        system,
    };
    manifest.inputs.push(inputs.forecasts.clone());
    manifest.inputs.push(inputs.trips.clone());
    manifest.inputs.extend(inputs.access.clone());

    let mut config = FactorConfig {
        beta_mode,
        transit_mode,
        multi_starts: starts,
        seed,
        ..defaults
    };
    config.solver.max_iterations = max_iterations;
    let factor_data = FactorData::new(&data.forecasts, &data.trips, &data.access, &config.transit_mode)?;
    if data.trips.mode_index(&config.transit_mode).is_none() {
        eprintln!(
            "warning: no `{}` trips; access coefficients are fixed at 0",
            config.transit_mode
        );
    }
    let fit = factor::fit(&factor_data, &config)?;
    let (lower, upper) = fit.params.bounds();
    let parameters = fit
        .params
        .names()
        .into_iter()
        .zip(fit.params.to_vector())
        .zip(lower.into_iter().zip(upper))
        .map(|((name, estimate), (lower_bound, upper_bound))| ParameterRow {
            name,
            estimate,
            lower_bound,
            upper_bound: upper_bound.is_finite().then_some(upper_bound),
        })
        .collect::<Vec<_>>();
    println!("{:<14}{:>16}", "Variable", "Coefficient");
    for p in &parameters {
        println!("{:<14}{:>16.6}", p.name, p.estimate);
    }
    println!(
        "objective {:e} (start {:e}); {} iterations; best start {}",
        fit.objective, fit.initial_objective, fit.iterations, fit.best_start
    );
    let converged = fit.converged;
    let (iterations, objective) = (fit.iterations, fit.objective);
    let doc = FactorModelDoc {
        parameters,
        fit,
        scheme,
        config,
        inputs,
        bootstrap: None,
    };
    ingest::write_text(&out, &to_json(&doc)?)?;
    manifest.output(&out)?;
    emit_manifest(&mut manifest, &s, a.common.manifest.as_deref(), Some(sibling_manifest(&out)))?;
    if converged {
        Ok(())
    } else {
        Err(Error::NotConverged {
            iterations,
            objective,
        })
    }
}

/// Reloads the data behind a fitted model, checking recorded digests for
/// files that were not overridden.
fn reload(doc: &FactorModelDoc, overrides: &DataArgs, s: &mut Settings, manifest: &mut RunManifest) -> Result<LoadedData> {
    fn pick(s: &mut Settings, key: &str, flag: Option<PathBuf>, recorded: Option<&FileDigest>) -> Result<Option<PathBuf>> {
        match s.path(key, flag)? {
            Some(p) => Ok(Some(p)),
            None => match recorded {
                Some(d) => {
                    let p = PathBuf::from(&d.path);
                    if sha256_file(&p)? != d.sha256 {
                        return Err(Error::Invalid(format!(
                            "{} changed since the model was fitted (digest mismatch)",
                            p.display()
                        )));
                    }
                    Ok(Some(p))
                }
                None => Ok(None),
            },
        }
    }
    let forecasts = pick(s, "forecasts", overrides.forecasts.clone(), Some(&doc.inputs.forecasts))?
        .expect("forecasts path is always recorded");
    let trips = pick(s, "trips", overrides.trips.clone(), Some(&doc.inputs.trips))?
        .expect("trips path is always recorded");
    let access = pick(s, "access", overrides.access.clone(), doc.inputs.access.as_ref())?;
    manifest.input(&forecasts)?;
    manifest.input(&trips)?;
    if let Some(p) = &access {
        manifest.input(p)?;
    }
    load_factor_inputs(&forecasts, &trips, access.as_deref(), &doc.scheme, &doc.inputs.modes, &doc.inputs.system)
}

pub fn bootstrap(a: BootstrapArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let model_path = s.required_path("model", a.model)?;
    let mut doc: FactorModelDoc = read_json(&model_path)?;
    let defaults = BootstrapConfig::default();
    let config = BootstrapConfig {
        replicates: s.get("replicates", a.replicates, defaults.replicates)?,
        ci_level: s.get("ci", a.ci, defaults.ci_level)?,
        seed: s.get("seed", a.seed, doc.config.seed)?,
        workers: s.get("workers", a.workers, defaults.workers)?,
    };
    let out = s.path("out", a.out)?;

    let mut manifest = RunManifest::new("bootstrap");
    manifest.seed = Some(config.seed);
    manifest.input(&model_path)?;
    let data = reload(&doc, &a.data, &mut s, &mut manifest)?;
    s.check_unused()?;
    if config.workers == 0 {
        return Err(Error::Invalid("--workers must be at least 1".into()));
    }
    let factor_data = FactorData::new(&data.forecasts, &data.trips, &data.access, &doc.config.transit_mode)?;
    let (summary, warnings) = factor::bootstrap(&doc.fit, &factor_data, &doc.config, &config)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    print!("{}", summary.table());
    doc.bootstrap = Some(summary);
    if let Some(out) = &out {
        ingest::write_text(out, &to_json(&doc)?)?;
        manifest.output(out)?;
    }
    emit_manifest(&mut manifest, &s, a.common.manifest.as_deref(), out.as_deref().map(sibling_manifest))
}

fn load_feature_map(path: &Path) -> Result<BTreeMap<String, String>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::MissingColumn {
            path: path.to_path_buf(),
            column: name.into(),
        })
    };
    let (zc, fc) = (col("zone_id")?, col("feature_id")?);
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        out.insert(rec[zc].to_string(), rec[fc].to_string());
    }
    Ok(out)
}

#[derive(Serialize)]
struct AnalysisSummary<'a> {
    zones: usize,
    total_substituted_trips: f64,
    constant_trips: f64,
    direct_trips: f64,
    access_trips: f64,
    revenue_daily: f64,
    revenue_annual: f64,
    direct_revenue_daily: f64,
    access_revenue_daily: f64,
    unattributed_revenue_daily: f64,
    revenue_by_mode_daily: BTreeMap<&'a str, f64>,
    assumptions: &'a analysis::RevenueAssumptions,
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let model_path = s.required_path("model", a.model)?;
    let defaults = FareSchedule::default();
    let fare = FareSchedule::new(
        s.get("fare-base", a.fare_base, defaults.base)?,
        s.get("fare-per-minute", a.fare_per_minute, defaults.per_minute)?,
    )?;
    let speed = s.get("speed-mph", a.speed_mph, analysis::DEFAULT_SPEED_MPH)?;
    let avg = s.get("avg-duration-min", a.avg_duration_min, analysis::DEFAULT_AVERAGE_DURATION_MIN)?;
    let feature_map = s.path("feature-map", a.feature_map)?;
    let out_dir = s.required_path("out-dir", a.out_dir)?;

    let mut manifest = RunManifest::new("analyze");
    let doc: FactorModelDoc = read_json(&model_path)?;
    manifest.input(&model_path)?;
    let overrides = DataArgs {
        forecasts: None,
        trips: a.trips,
        access: a.access,
    };
    let data = reload(&doc, &overrides, &mut s, &mut manifest)?;
    s.check_unused()?;

    let transit = &doc.config.transit_mode;
    let preds = factor::predict_substitution(&doc.fit.params, &data.trips, &data.access, transit)?;
    let shares = analysis::substitution_shares(&preds, &data.trips, transit)?;
    let report = analysis::substitution_revenue(
        &preds,
        data.trips.modes(),
        &doc.scheme,
        &data.access,
        &fare,
        speed,
        avg,
    )?;

    create_dir(&out_dir)?;
    let shares_path = out_dir.join("shares.csv");
    let revenue_path = out_dir.join("revenue.csv");
    let summary_path = out_dir.join("summary.json");
    ingest::write_text(&shares_path, &shares.to_csv())?;
    ingest::write_text(&revenue_path, &report.to_csv())?;
    let summary = AnalysisSummary {
        zones: preds.len(),
        total_substituted_trips: preds.iter().map(|p| p.total).sum(),
        constant_trips: preds.iter().map(|p| p.constant_share).sum(),
        direct_trips: preds.iter().map(|p| p.direct_total()).sum(),
        access_trips: preds.iter().map(|p| p.access_total()).sum(),
        revenue_daily: report.total_daily,
        revenue_annual: report.total_annual,
        direct_revenue_daily: report.direct_daily,
        access_revenue_daily: report.access_daily,
        unattributed_revenue_daily: report.unattributed_daily,
        revenue_by_mode_daily: report
            .modes
            .iter()
            .map(|m| (m.as_str(), report.mode_daily(m).unwrap_or(0.0)))
            .collect(),
        assumptions: &report.assumptions,
    };
    ingest::write_text(&summary_path, &to_json(&summary)?)?;
    for p in [&shares_path, &revenue_path, &summary_path] {
        manifest.output(p)?;
    }
    if let Some(map_path) = &feature_map {
        manifest.input(map_path)?;
        let map = load_feature_map(map_path)?;
        let table = analysis::zone_property_table(&preds, &shares, &map);
        let geo_path = out_dir.join("zones.geojson");
        ingest::write_text(&geo_path, &to_json(&table)?)?;
        manifest.output(&geo_path)?;
    }
    eprintln!(
        "{} substituted trips/day; revenue {}/day, {}/yr",
        ingest::format_sig6(summary.total_substituted_trips),
        ingest::format_sig6(report.total_daily),
        ingest::format_sig6(report.total_annual)
    );
    emit_manifest(&mut manifest, &s, a.common.manifest.as_deref(), Some(out_dir.join("manifest.json")))
}

/// Overrides applied to the standard scenario when the JSON is not a full
/// scenario.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioOverrides {
    seed: Option<u64>,
    n_zones: Option<usize>,
    log_sd: Option<f64>,
    trip_sd: Option<f64>,
}

fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::standard(0));
    };
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    if let Ok(full) = serde_json::from_str::<ScenarioConfig>(&text) {
        return Ok(full);
    }
    let o: ScenarioOverrides = serde_json::from_str(&text)
        .map_err(|e| Error::Invalid(format!("{}: not a scenario or scenario overrides: {e}", path.display())))?;
    let mut cfg = ScenarioConfig::standard(o.seed.unwrap_or(0));
    if let Some(n) = o.n_zones {
        cfg.n_zones = n;
    }
    if let Some(v) = o.log_sd {
        cfg.noise.log_sd = v;
    }
    if let Some(v) = o.trip_sd {
        cfg.noise.trip_sd = v;
    }
    Ok(cfg)
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = load_scenario(a.config.as_deref())?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let scenario = synth::generate(&cfg)?;
    let dir = &a.out_dir;
    create_dir(dir)?;

    let mut manifest = RunManifest::new("synth");
    manifest.seed = Some(cfg.seed);
    if let Some(p) = &a.config {
        manifest.input(p)?;
    }
    let files = [
        "profiles.csv",
        "observed.csv",
        "trips.csv",
        "access.csv",
        "forecasts.csv",
        "spec.json",
        "scenario.json",
    ]
    .map(|f| dir.join(f));
    ingest::write_zone_profiles(&files[0], &scenario.profiles)?;
    ingest::write_zone_values(
        &files[1],
        DEFAULT_OBSERVED_COLUMN,
        scenario.observed.iter().map(|(z, v)| (z, *v)),
    )?;
    ingest::write_trip_matrix(&files[2], &scenario.trips)?;
    ingest::write_transit_access(&files[3], &scenario.access)?;
    ingest::write_forecasts(&files[4], &scenario.forecasts)?;
    ingest::write_text(&files[5], &to_json(&cfg.demand_spec)?)?;
    ingest::write_text(&files[6], &to_json(&cfg)?)?;
    for f in &files {
        manifest.output(f)?;
    }
    let mut settings = Settings::load(None)?;
    settings.effective.insert("seed".into(), cfg.seed.to_string());
    settings.effective.insert("n-zones".into(), cfg.n_zones.to_string());
    settings.effective.insert("log-sd".into(), cfg.noise.log_sd.to_string());
    settings.effective.insert("trip-sd".into(), cfg.noise.trip_sd.to_string());
    eprintln!("wrote {} zones to {}", cfg.n_zones, dir.display());
    emit_manifest(&mut manifest, &settings, a.manifest.as_deref(), Some(dir.join("manifest.json")))
}

pub fn validate(a: ValidateArgs) -> Result<()> {
    let mut s = Settings::load(a.common.config.as_deref())?;
    let system = s.get("system", a.system, DEFAULT_SYSTEM.to_string())?;
    let profiles = s.path("profiles", a.profiles)?;
    let observed = s.path("observed", a.observed)?;
    let column = s.get("observed-column", a.observed_column, DEFAULT_OBSERVED_COLUMN.to_string())?;
    let forecasts = s.path("forecasts", a.data.forecasts)?;
    let trips = s.path("trips", a.data.trips)?;
    let access = s.path("access", a.data.access)?;
    let crosswalk = s.path("crosswalk", a.crosswalk)?;
    let scheme = resolve_scheme(&mut s, a.bins, a.bin_edges)?;
    let modes = resolve_modes(&mut s, a.modes)?;
    s.check_unused()?;

    let mut manifest = RunManifest::new("validate");
    let mut problems = 0usize;
    let mut report = |name: &str, path: &Path, outcome: Result<String>| {
        match outcome {
            Ok(msg) => eprintln!("ok    {name} {}: {msg}", path.display()),
            Err(e) => {
                problems += 1;
                eprintln!("FAIL  {name} {}: {e}", path.display());
            }
        }
    };
    if let Some(p) = &profiles {
        let r = ingest::load_zone_profiles(p, &ProfileSchema::default(), &system).map(|v| format!("{} zones", v.len()));
        report("profiles", p, r);
        manifest.input(p)?;
    }
    if let Some(p) = &observed {
        let r = ingest::load_zone_values(p, &column, &system).map(|v| format!("{} zones", v.len()));
        report("observed", p, r);
        manifest.input(p)?;
    }
    if let Some(p) = &forecasts {
        let r = ingest::load_forecasts(p, &system).map(|v| format!("{} zones", v.len()));
        report("forecasts", p, r);
        manifest.input(p)?;
    }
    if let Some(p) = &trips {
        let options = TripLoadOptions {
            modes,
            zones: None,
            system: system.clone(),
        };
        let r = ingest::load_trip_matrix(p, &scheme, &options).and_then(|m| {
            let v = validate_trip_matrix(&m);
            if v.is_empty() {
                Ok(format!("{} modes x {} zones x {} bins", m.n_modes(), m.n_zones(), m.n_bins()))
            } else {
                Err(Error::Invalid(format!("{} invalid cell(s), first: {:?}", v.len(), v[0])))
            }
        });
        report("trips", p, r);
        manifest.input(p)?;
    }
    if let Some(p) = &access {
        let r = ingest::load_transit_access(p, &system).map(|v| format!("{} zones", v.len()));
        report("access", p, r);
        manifest.input(p)?;
    }
    if let Some(p) = &crosswalk {
        let r = ingest::load_crosswalk(p, &system, "target").map(|entries| {
            let mut sums: BTreeMap<&ZoneId, f64> = BTreeMap::new();
            for e in &entries {
                *sums.entry(&e.source_zone).or_insert(0.0) += e.weight;
            }
            let off = sums
                .values()
                .filter(|w| (**w - 1.0).abs() > ingest::WEIGHT_SUM_TOL)
                .count();
            if off > 0 {
                eprintln!("warning: {off} source zone(s) have weights not summing to 1");
            }
            format!("{} links, {} source zones", entries.len(), sums.len())
        });
        report("crosswalk", p, r);
        manifest.input(p)?;
    }
    emit_manifest(&mut manifest, &s, a.common.manifest.as_deref(), None)?;
    if problems == 0 {
        Ok(())
    } else {
        Err(Error::Invalid(format!("{problems} file(s) failed validation")))
    }
}
