//! CSV readers and writers, and population-weighted transfer of zonal
//! attributes between zoning systems.
//!
//! All files are comma-delimited UTF-8 with a header row; columns are found
//! by name, so column order does not matter.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, RowError};
use crate::types::{
    DemandForecast, DistanceBinScheme, ModalTripMatrix, TransitAccessProfile, ZoneId, ZoneProfile,
};

/// Mode labels accepted in trip files unless the caller supplies its own list.
pub const DEFAULT_MODES: [&str; 7] = ["carpool", "transit", "taxi", "bike", "walk", "auto", "citibike"];

/// Tolerance on per-source crosswalk weight sums before a warning is raised.
pub const WEIGHT_SUM_TOL: f64 = 1e-6;

/// Parsed CSV with a header lookup.
struct Table {
    path: std::path::PathBuf,
    header: HashMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let header = reader
            .headers()
            .map_err(csv_err)?
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    fn column(&self, name: &str) -> Result<usize> {
        self.header.get(name).copied().ok_or_else(|| Error::MissingColumn {
            path: self.path.clone(),
            column: name.to_string(),
        })
    }

    fn optional(&self, name: &str) -> Option<usize> {
        self.header.get(name).copied()
    }

    fn invalid(&self, rows: Vec<RowError>) -> Error {
        Error::InvalidRows {
            path: self.path.clone(),
            rows,
        }
    }
}

fn parse_number(rec: &csv::StringRecord, idx: usize, name: &str) -> std::result::Result<f64, String> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<f64>()
        .map_err(|_| format!("field `{name}`: cannot parse `{raw}` as a number"))
}

fn parse_zone(rec: &csv::StringRecord, idx: usize, system: &str) -> std::result::Result<ZoneId, String> {
    ZoneId::new(rec.get(idx).unwrap_or(""), system).map_err(|e| e.to_string())
}

fn create(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Column names for each profile field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSchema {
    pub zone_id: String,
    pub population: String,
    pub area: String,
    /// Optional; computed as population / area when the column is absent.
    pub density: String,
    pub median_age: String,
    pub age_ratio_20_40: String,
    pub labor_rate: String,
    pub median_income: String,
    pub health_insurance_rate: String,
    pub unemployment_rate: String,
}

impl Default for ProfileSchema {
    fn default() -> Self {
        ProfileSchema {
            zone_id: "zone_id".into(),
            population: "population".into(),
            area: "area_sqmi".into(),
            density: "density".into(),
            median_age: "median_age".into(),
            age_ratio_20_40: "age_ratio_20_40".into(),
            labor_rate: "labor_rate".into(),
            median_income: "median_income".into(),
            health_insurance_rate: "health_insurance_rate".into(),
            unemployment_rate: "unemployment_rate".into(),
        }
    }
}

/// Reads zone profiles. Every row is validated; if any fail, the error lists
/// each bad row with its line number. Numeric columns outside the schema are
/// kept in [`ZoneProfile::extra`].
pub fn load_zone_profiles(path: &Path, schema: &ProfileSchema, system: &str) -> Result<Vec<ZoneProfile>> {
    let table = Table::read(path)?;
    let zone_col = table.column(&schema.zone_id)?;
    let required = [
        &schema.population,
        &schema.area,
        &schema.median_age,
        &schema.age_ratio_20_40,
        &schema.labor_rate,
        &schema.median_income,
        &schema.health_insurance_rate,
        &schema.unemployment_rate,
    ];
    let cols: Vec<usize> = required.iter().map(|c| table.column(c)).collect::<Result<_>>()?;
    let density_col = table.optional(&schema.density);
    let known: BTreeSet<usize> = cols.iter().copied().chain([zone_col]).chain(density_col).collect();
    let extra_cols: Vec<(String, usize)> = table
        .header
        .iter()
        .filter(|(_, i)| !known.contains(i))
        .map(|(n, &i)| (n.clone(), i))
        .collect();

    let mut profiles = Vec::new();
    let mut errors = Vec::new();
    for (line, rec) in &table.rows {
        let parsed = (|| -> std::result::Result<ZoneProfile, String> {
            let zone = parse_zone(rec, zone_col, system)?;
            let v: Vec<f64> = cols
                .iter()
                .zip(required)
                .map(|(&i, name)| parse_number(rec, i, name))
                .collect::<std::result::Result<_, _>>()?;
            let density = match density_col {
                Some(i) => parse_number(rec, i, &schema.density)?,
                None => v[0] / v[1],
            };
            let mut extra = BTreeMap::new();
            for (name, i) in &extra_cols {
                if let Ok(x) = rec.get(*i).unwrap_or("").parse::<f64>() {
                    extra.insert(name.clone(), x);
                }
            }
            Ok(ZoneProfile {
                zone,
                population: v[0],
                area: v[1],
                density,
                median_age: v[2],
                age_ratio_20_40: v[3],
                labor_rate: v[4],
                median_income: v[5],
                health_insurance_rate: v[6],
                unemployment_rate: v[7],
                extra,
            })
        })();
        match parsed {
            Ok(p) => {
                let problems = p.violations();
                if problems.is_empty() {
                    profiles.push(p);
                } else {
                    for (field, why) in problems {
                        let message = if why == "nonpositive field" {
                            format!("zone `{}`: nonpositive field: {field}", p.zone.id)
                        } else {
                            format!("zone `{}`: {field}: {why}", p.zone.id)
                        };
                        errors.push(RowError { line: *line, message });
                    }
                }
            }
            Err(message) => errors.push(RowError { line: *line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(table.invalid(errors));
    }
    Ok(profiles)
}

pub fn write_zone_profiles(path: &Path, profiles: &[ZoneProfile]) -> Result<()> {
    let mut w = create(path)?;
    let extras: BTreeSet<&String> = profiles.iter().flat_map(|p| p.extra.keys()).collect();
    let mut header = vec![
        "zone_id",
        "population",
        "area_sqmi",
        "median_age",
        "age_ratio_20_40",
        "labor_rate",
        "median_income",
        "health_insurance_rate",
        "unemployment_rate",
    ];
    header.extend(extras.iter().map(|s| s.as_str()));
    w.write_record(&header).map_err(csv_io(path))?;
    for p in profiles {
        let mut rec = vec![
            p.zone.id.clone(),
            p.population.to_string(),
            p.area.to_string(),
            p.median_age.to_string(),
            p.age_ratio_20_40.to_string(),
            p.labor_rate.to_string(),
            p.median_income.to_string(),
            p.health_insurance_rate.to_string(),
            p.unemployment_rate.to_string(),
        ];
        for e in &extras {
            rec.push(p.extra.get(*e).map_or(String::new(), |v| v.to_string()));
        }
        w.write_record(&rec).map_err(csv_io(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `zone_id,<column>` pairs, e.g. observed ridership.
pub fn load_zone_values(path: &Path, column: &str, system: &str) -> Result<BTreeMap<ZoneId, f64>> {
    let table = Table::read(path)?;
    let zc = table.column("zone_id")?;
    let vc = table.column(column)?;
    let mut out = BTreeMap::new();
    let mut errors = Vec::new();
    for (line, rec) in &table.rows {
        match parse_zone(rec, zc, system).and_then(|z| Ok((z, parse_number(rec, vc, column)?))) {
            Ok((z, v)) if !v.is_finite() => errors.push(RowError {
                line: *line,
                message: format!("zone `{}`: non-finite {column}", z.id),
            }),
            Ok((z, v)) => {
                if out.insert(z.clone(), v).is_some() {
                    errors.push(RowError {
                        line: *line,
                        message: format!("duplicate zone `{}`", z.id),
                    });
                }
            }
            Err(message) => errors.push(RowError { line: *line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(table.invalid(errors));
    }
    Ok(out)
}

/// Reads `zone_id,trips` forecasts in file order.
pub fn load_forecasts(path: &Path, system: &str) -> Result<Vec<DemandForecast>> {
    let table = Table::read(path)?;
    let zc = table.column("zone_id")?;
    let tc = table.column("trips")?;
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (line, rec) in &table.rows {
        let parsed = parse_zone(rec, zc, system)
            .and_then(|z| DemandForecast::new(z, parse_number(rec, tc, "trips")?).map_err(|e| e.to_string()));
        match parsed {
            Ok(f) => out.push(f),
            Err(message) => errors.push(RowError { line: *line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(table.invalid(errors));
    }
    Ok(out)
}

/// Writes `zone_id,<column>` with full precision.
pub fn write_zone_values<'a>(
    path: &Path,
    column: &str,
    values: impl IntoIterator<Item = (&'a ZoneId, f64)>,
) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["zone_id", column]).map_err(csv_io(path))?;
    for (z, v) in values {
        w.write_record([z.id.as_str(), &v.to_string()]).map_err(csv_io(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_forecasts(path: &Path, forecasts: &[DemandForecast]) -> Result<()> {
    write_zone_values(path, "trips", forecasts.iter().map(|f| (&f.zone, f.trips)))
}

/// Reads `zone_id,access_hr,egress_hr`.
pub fn load_transit_access(path: &Path, system: &str) -> Result<Vec<TransitAccessProfile>> {
    let table = Table::read(path)?;
    let zc = table.column("zone_id")?;
    let ac = table.column("access_hr")?;
    let ec = table.column("egress_hr")?;
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (line, rec) in &table.rows {
        let parsed = (|| -> std::result::Result<_, String> {
            let z = parse_zone(rec, zc, system)?;
            let a = parse_number(rec, ac, "access_hr")?;
            let e = parse_number(rec, ec, "egress_hr")?;
            TransitAccessProfile::new(z, a, e).map_err(|e| e.to_string())
        })();
        match parsed {
            Ok(p) => out.push(p),
            Err(message) => errors.push(RowError { line: *line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(table.invalid(errors));
    }
    Ok(out)
}

pub fn write_transit_access(path: &Path, access: &[TransitAccessProfile]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["zone_id", "access_hr", "egress_hr"]).map_err(csv_io(path))?;
    for a in access {
        w.write_record([a.zone.id.clone(), a.access_time.to_string(), a.egress_time.to_string()])
            .map_err(csv_io(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Options for reading a trip file.
#[derive(Debug, Clone, PartialEq)]
pub struct TripLoadOptions {
    /// Accepted mode labels, in the order they should appear in the matrix.
    /// Only labels present in the file become matrix modes.
    pub modes: Vec<String>,
    /// Zone universe; zones listed here but absent from the file get zero
    /// trips for every mode. When `None`, zones appear in first-seen order.
    pub zones: Option<Vec<ZoneId>>,
    pub system: String,
}

impl Default for TripLoadOptions {
    fn default() -> Self {
        TripLoadOptions {
            modes: DEFAULT_MODES.iter().map(|s| s.to_string()).collect(),
            zones: None,
            system: "taz".into(),
        }
    }
}

/// Reads `mode,zone_id,distance_mi|bin_index,trips` rows into a trip matrix.
/// Rows sharing a (mode, zone, bin) cell are summed.
pub fn load_trip_matrix(path: &Path, scheme: &DistanceBinScheme, options: &TripLoadOptions) -> Result<ModalTripMatrix> {
    let table = Table::read(path)?;
    let mc = table.column("mode")?;
    let zc = table.column("zone_id")?;
    let tc = table.column("trips")?;
    let dist_col = table.optional("distance_mi");
    let bin_col = table.optional("bin_index");
    if dist_col.is_none() && bin_col.is_none() {
        return Err(Error::MissingColumn {
            path: table.path.clone(),
            column: "distance_mi (or bin_index)".into(),
        });
    }

    let mut cells: Vec<(String, ZoneId, usize, f64)> = Vec::new();
    let mut errors = Vec::new();
    for (line, rec) in &table.rows {
        let mode = rec.get(mc).unwrap_or("").to_string();
        if !options.modes.contains(&mode) {
            return Err(Error::UnknownMode(mode));
        }
        let parsed = (|| -> std::result::Result<_, String> {
            let zone = parse_zone(rec, zc, &options.system)?;
            let trips = parse_number(rec, tc, "trips")?;
            if !trips.is_finite() || trips < 0.0 {
                return Err(format!("negative or non-finite trips {trips}"));
            }
            let dist_raw = dist_col.and_then(|i| rec.get(i)).filter(|s| !s.is_empty());
            let bin = match (dist_raw, bin_col.and_then(|i| rec.get(i)).filter(|s| !s.is_empty())) {
                (Some(raw), _) => {
                    let d: f64 = raw
                        .parse()
                        .map_err(|_| format!("cannot parse distance `{raw}`"))?;
                    scheme
                        .bin_of(d)
                        .ok_or_else(|| format!("distance out of scheme: {d} mi (scheme covers [0, {}))", scheme.upper()))?
                }
                (None, Some(raw)) => {
                    let b: usize = raw.parse().map_err(|_| format!("cannot parse bin index `{raw}`"))?;
                    if b >= scheme.len() {
                        return Err(format!("bin index {b} out of scheme ({} bins)", scheme.len()));
                    }
                    b
                }
                (None, None) => return Err("row has neither distance_mi nor bin_index".into()),
            };
            Ok((zone, bin, trips))
        })();
        match parsed {
            Ok((zone, bin, trips)) => cells.push((mode, zone, bin, trips)),
            Err(message) => errors.push(RowError { line: *line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(table.invalid(errors));
    }

    let present: BTreeSet<&str> = cells.iter().map(|c| c.0.as_str()).collect();
    let modes: Vec<String> = options
        .modes
        .iter()
        .filter(|m| present.contains(m.as_str()))
        .cloned()
        .collect();
    let zones: Vec<ZoneId> = match &options.zones {
        Some(z) => z.clone(),
        None => {
            let mut seen = BTreeSet::new();
            cells
                .iter()
                .filter(|c| seen.insert(c.1.clone()))
                .map(|c| c.1.clone())
                .collect()
        }
    };
    let zone_index: HashMap<&ZoneId, usize> = zones.iter().enumerate().map(|(i, z)| (z, i)).collect();
    let mode_index: HashMap<&str, usize> = modes.iter().enumerate().map(|(i, m)| (m.as_str(), i)).collect();
    let mut matrix = ModalTripMatrix::zeros(modes.clone(), zones.clone(), scheme.clone());
    for (mode, zone, bin, trips) in &cells {
        let z = *zone_index.get(zone).ok_or_else(|| {
            Error::ZoneMismatch(format!("trip zone `{}` is outside the zone list", zone.id))
        })?;
        matrix.add(mode_index[mode.as_str()], z, *bin, *trips);
    }
    Ok(matrix)
}

/// Writes one row per nonzero (mode, zone, bin) cell using `bin_index`.
pub fn write_trip_matrix(path: &Path, matrix: &ModalTripMatrix) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["mode", "zone_id", "bin_index", "trips"]).map_err(csv_io(path))?;
    for (m, mode) in matrix.modes().iter().enumerate() {
        for (z, zone) in matrix.zones().iter().enumerate() {
            for d in 0..matrix.n_bins() {
                let v = matrix.get(m, z, d);
                if v != 0.0 {
                    w.write_record([mode.as_str(), zone.id.as_str(), &d.to_string(), &v.to_string()])
                        .map_err(csv_io(path))?;
                }
            }
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrosswalkEntry {
    pub source_zone: ZoneId,
    pub target_zone: ZoneId,
    /// Share of the source zone's population lying in the target zone.
    pub weight: f64,
}

pub fn load_crosswalk(path: &Path, source_system: &str, target_system: &str) -> Result<Vec<CrosswalkEntry>> {
    let table = Table::read(path)?;
    let sc = table.column("source_zone")?;
    let tc = table.column("target_zone")?;
    let wc = table.column("weight")?;
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (line, rec) in &table.rows {
        let parsed = (|| -> std::result::Result<_, String> {
            let weight = parse_number(rec, wc, "weight")?;
            if !(0.0..=1.0).contains(&weight) {
                return Err(format!("weight {weight} outside [0, 1]"));
            }
            Ok(CrosswalkEntry {
                source_zone: parse_zone(rec, sc, source_system)?,
                target_zone: parse_zone(rec, tc, target_system)?,
                weight,
            })
        })();
        match parsed {
            Ok(e) => out.push(e),
            Err(message) => errors.push(RowError { line: *line, message }),
        }
    }
    if !errors.is_empty() {
        return Err(table.invalid(errors));
    }
    Ok(out)
}

pub fn write_crosswalk(path: &Path, entries: &[CrosswalkEntry]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["source_zone", "target_zone", "weight"]).map_err(csv_io(path))?;
    for e in entries {
        w.write_record([e.source_zone.id.clone(), e.target_zone.id.clone(), e.weight.to_string()])
            .map_err(csv_io(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// How an attribute behaves when a zone is split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeClass {
    /// Sums under splitting (population, trips).
    Extensive,
    /// Averages under splitting (rates, medians, densities, ratios).
    Intensive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeKind {
    pub name: String,
    pub class: AttributeClass,
}

impl AttributeKind {
    /// Classifies a column by name: population and trip counts are
    /// extensive, everything else intensive.
    pub fn infer(name: &str) -> Self {
        let lower = name.to_ascii_lowercase();
        let extensive = lower == "population" || lower == "pop" || lower.contains("trips") || lower == "count";
        AttributeKind {
            name: name.to_string(),
            class: if extensive {
                AttributeClass::Extensive
            } else {
                AttributeClass::Intensive
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    pub values: BTreeMap<ZoneId, f64>,
    pub warnings: Vec<String>,
}

/// Normalised weights per source zone, with warnings for sums off by more
/// than [`WEIGHT_SUM_TOL`].
fn normalized_weights(crosswalk: &[CrosswalkEntry]) -> Result<(BTreeMap<&ZoneId, Vec<(&ZoneId, f64)>>, Vec<String>)> {
    let mut by_source: BTreeMap<&ZoneId, Vec<(&ZoneId, f64)>> = BTreeMap::new();
    for e in crosswalk {
        if !(e.weight >= 0.0) || !e.weight.is_finite() {
            return Err(Error::Invalid(format!(
                "crosswalk weight {} for {} -> {} is negative or non-finite",
                e.weight, e.source_zone.id, e.target_zone.id
            )));
        }
        by_source.entry(&e.source_zone).or_default().push((&e.target_zone, e.weight));
    }
    let mut warnings = Vec::new();
    for (src, targets) in by_source.iter_mut() {
        let sum: f64 = targets.iter().map(|t| t.1).sum();
        if !(sum > 0.0) {
            return Err(Error::Invalid(format!("crosswalk weights for `{}` sum to zero", src.id)));
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            warnings.push(format!(
                "crosswalk weights for source zone `{}` sum to {sum}; renormalised",
                src.id
            ));
        }
        for t in targets.iter_mut() {
            t.1 /= sum;
        }
    }
    Ok((by_source, warnings))
}

/// Moves a per-source-zone attribute onto target zones.
///
/// Extensive values are split by weight and summed per target. Intensive
/// values become population-weighted means over the contributing pieces,
/// which needs `population` for every source zone; for medians this is an
/// approximation, since a median of a union cannot be recovered from the
/// parts' medians.
pub fn crosswalk_transfer(
    values: &BTreeMap<ZoneId, f64>,
    kind: &AttributeKind,
    crosswalk: &[CrosswalkEntry],
    population: Option<&BTreeMap<ZoneId, f64>>,
) -> Result<Transfer> {
    let (by_source, warnings) = normalized_weights(crosswalk)?;
    let unmapped: Vec<String> = values
        .keys()
        .filter(|z| !by_source.contains_key(z))
        .map(|z| z.id.clone())
        .collect();
    if !unmapped.is_empty() {
        return Err(Error::UnmappedZones(unmapped));
    }

    let mut out: BTreeMap<ZoneId, f64> = BTreeMap::new();
    match kind.class {
        AttributeClass::Extensive => {
            for (src, v) in values {
                for (tgt, w) in &by_source[src] {
                    *out.entry((*tgt).clone()).or_insert(0.0) += w * v;
                }
            }
        }
        AttributeClass::Intensive => {
            let pop = population.ok_or_else(|| {
                Error::Invalid(format!(
                    "intensive attribute `{}` needs source-zone population for weighting",
                    kind.name
                ))
            })?;
            // target -> (sum p*v, sum p, sum w*v, sum w)
            let mut acc: BTreeMap<&ZoneId, (f64, f64, f64, f64)> = BTreeMap::new();
            for (src, v) in values {
                let p_src = *pop.get(src).ok_or_else(|| Error::MissingField {
                    zone: src.id.clone(),
                    field: "population".into(),
                })?;
                for (tgt, w) in &by_source[src] {
                    let a = acc.entry(tgt).or_insert((0.0, 0.0, 0.0, 0.0));
                    let p = w * p_src;
                    a.0 += p * v;
                    a.1 += p;
                    a.2 += w * v;
                    a.3 += w;
                }
            }
            for (tgt, (pv, p, wv, w)) in acc {
                // unpopulated targets fall back to area-share weighting
                let value = if p > 0.0 { pv / p } else { wv / w };
                out.insert(tgt.clone(), value);
            }
        }
    }
    Ok(Transfer { values: out, warnings })
}

/// Formats a number with six significant digits, like C's `%.6g`.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding may carry into the next decade
    let rounded: f64 = format!("{:.5e}", x).parse().unwrap_or(x);
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) { exp + 1 } else { exp };
    let s = if !(-5..6).contains(&exp) {
        let m = format!("{:.5e}", x);
        let (mant, e) = m.split_once('e').unwrap();
        let mant = trim_zeros(mant);
        let e: i32 = e.parse().unwrap();
        format!("{mant}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes an in-memory CSV body to `path`.
pub fn write_text(path: &Path, body: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(body.as_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
