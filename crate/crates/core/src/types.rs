//! Domain types shared by every stage of the pipeline.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for `density == population / area` when all three are given.
pub const DENSITY_REL_TOL: f64 = 5e-3;

/// Upper sanity bound on access/egress times, hours.
pub const MAX_ACCESS_HOURS: f64 = 2.0;

/// Identifier of a zone inside a particular zoning system ("zip", "taz", ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ZoneId {
    pub id: String,
    pub system: String,
}

impl ZoneId {
    pub fn new(id: impl Into<String>, system: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.trim().is_empty() {
            return Err(Error::Invalid("empty zone id".into()));
        }
        Ok(ZoneId {
            id,
            system: system.into(),
        })
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.system, self.id)
    }
}

/// Per-zone demographics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneProfile {
    pub zone: ZoneId,
    pub population: f64,
    /// Square miles.
    pub area: f64,
    /// Persons per square mile.
    pub density: f64,
    pub median_age: f64,
    /// Fraction of residents aged 20 to 40.
    pub age_ratio_20_40: f64,
    /// Labor force participation, percent.
    pub labor_rate: f64,
    /// Median household income, dollars.
    pub median_income: f64,
    /// Percent with health insurance.
    pub health_insurance_rate: f64,
    /// Percent, may be zero.
    pub unemployment_rate: f64,
    /// Additional numeric columns, addressable by name from a model spec.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

/// Built-in profile fields that may appear inside a logarithm.
pub const LOG_FIELDS: [&str; 6] = [
    "density",
    "median_age",
    "age_ratio_20_40",
    "labor_rate",
    "median_income",
    "health_insurance_rate",
];

impl ZoneProfile {
    /// Looks up a numeric field by its column name.
    pub fn field(&self, name: &str) -> Option<f64> {
        let v = match name {
            "population" => self.population,
            "area_sqmi" | "area" => self.area,
            "density" => self.density,
            "median_age" => self.median_age,
            "age_ratio_20_40" | "age_ratio" => self.age_ratio_20_40,
            "labor_rate" | "labor" => self.labor_rate,
            "median_income" | "income" => self.median_income,
            "health_insurance_rate" | "health_insurance" => self.health_insurance_rate,
            "unemployment_rate" | "unemployment" => self.unemployment_rate,
            other => return self.extra.get(other).copied(),
        };
        Some(v)
    }

    /// Returns every violated constraint as `(field, reason)`; empty when valid.
    pub fn violations(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut push = |f: &str, why: &str| out.push((f.to_string(), why.to_string()));
        let fields = [
            ("population", self.population),
            ("area_sqmi", self.area),
            ("density", self.density),
            ("median_age", self.median_age),
            ("age_ratio_20_40", self.age_ratio_20_40),
            ("labor_rate", self.labor_rate),
            ("median_income", self.median_income),
            ("health_insurance_rate", self.health_insurance_rate),
            ("unemployment_rate", self.unemployment_rate),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                push(name, "non-finite");
            }
        }
        if self.population < 0.0 {
            push("population", "negative");
        }
        if self.area <= 0.0 {
            push("area_sqmi", "nonpositive field");
        }
        for name in LOG_FIELDS {
            let v = self.field(name).unwrap_or(f64::NAN);
            if v.is_finite() && v <= 0.0 {
                push(name, "nonpositive field");
            }
        }
        if self.age_ratio_20_40 > 1.0 {
            push("age_ratio_20_40", "exceeds 1");
        }
        if self.labor_rate > 100.0 {
            push("labor_rate", "exceeds 100");
        }
        if self.health_insurance_rate > 100.0 {
            push("health_insurance_rate", "exceeds 100");
        }
        if !(0.0..=100.0).contains(&self.unemployment_rate) {
            push("unemployment_rate", "outside [0, 100]");
        }
        if self.area > 0.0 && self.population.is_finite() && self.density.is_finite() {
            let implied = self.population / self.area;
            let scale = implied.abs().max(f64::MIN_POSITIVE);
            if (self.density - implied).abs() / scale > DENSITY_REL_TOL {
                push("density", "inconsistent with population / area");
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some((field, why)) if why == "nonpositive field" => Err(Error::NonPositive {
                zone: self.zone.id.clone(),
                field,
            }),
            Some((field, why)) => Err(Error::Invalid(format!(
                "zone `{}`: {field}: {why}",
                self.zone.id
            ))),
        }
    }
}

/// Ordered, contiguous distance bins `[lo, hi)` in miles with a
/// representative distance per bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceBinScheme {
    edges: Vec<f64>,
    delta: Vec<f64>,
}

impl DistanceBinScheme {
    /// `edges` has one more entry than `delta`; bin `d` is `[edges[d], edges[d+1])`.
    pub fn new(edges: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Invalid("distance scheme needs at least one bin".into()));
        }
        if edges.len() != delta.len() + 1 {
            return Err(Error::Invalid(format!(
                "distance scheme has {} edges but {} representative distances",
                edges.len(),
                delta.len()
            )));
        }
        if edges[0] != 0.0 {
            return Err(Error::Invalid("first distance bin must start at 0".into()));
        }
        for (d, w) in edges.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::Invalid(format!(
                    "distance bin edges must be finite and strictly increasing (bin {d})"
                )));
            }
            if !(delta[d] > w[0] && delta[d] < w[1]) {
                return Err(Error::Invalid(format!(
                    "representative distance {} lies outside bin [{}, {})",
                    delta[d], w[0], w[1]
                )));
            }
        }
        Ok(DistanceBinScheme { edges, delta })
    }

    /// Bins with the given edges, represented by their midpoints.
    pub fn with_midpoints(edges: Vec<f64>) -> Result<Self> {
        let delta = edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        Self::new(edges, delta)
    }

    /// Fourteen one-mile bins covering 0 to 14 miles.
    pub fn one_mile_bins(n: usize) -> Self {
        Self::with_midpoints((0..=n).map(|e| e as f64).collect())
            .expect("uniform one-mile bins are valid")
    }

    pub fn len(&self) -> usize {
        self.delta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta.is_empty()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn deltas(&self) -> &[f64] {
        &self.delta
    }

    pub fn delta(&self, bin: usize) -> f64 {
        self.delta[bin]
    }

    pub fn bounds(&self, bin: usize) -> (f64, f64) {
        (self.edges[bin], self.edges[bin + 1])
    }

    pub fn upper(&self) -> f64 {
        *self.edges.last().unwrap()
    }

    /// Index of the bin containing `distance`, or `None` if out of range.
    pub fn bin_of(&self, distance: f64) -> Option<usize> {
        if !(distance >= 0.0) || distance >= self.upper() {
            return None;
        }
        // first edge strictly greater than distance, minus one
        let idx = self.edges.partition_point(|&e| e <= distance);
        Some(idx - 1)
    }

    pub fn label(&self, bin: usize) -> String {
        let (lo, hi) = self.bounds(bin);
        format!("{lo}-{hi}")
    }
}

impl Default for DistanceBinScheme {
    fn default() -> Self {
        Self::one_mile_bins(14)
    }
}

/// Trips by mode, zone and distance bin.
///
/// Counts are stored mode-major: `counts[(m * zones + z) * bins + d]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalTripMatrix {
    modes: Vec<String>,
    zones: Vec<ZoneId>,
    scheme: DistanceBinScheme,
    counts: Vec<f64>,
}

impl ModalTripMatrix {
    pub fn zeros(modes: Vec<String>, zones: Vec<ZoneId>, scheme: DistanceBinScheme) -> Self {
        let n = modes.len() * zones.len() * scheme.len();
        ModalTripMatrix {
            modes,
            zones,
            scheme,
            counts: vec![0.0; n],
        }
    }

    /// Builds a matrix from raw counts. Only the shape is checked here;
    /// use [`validate_trip_matrix`] for content checks.
    pub fn from_counts(
        modes: Vec<String>,
        zones: Vec<ZoneId>,
        scheme: DistanceBinScheme,
        counts: Vec<f64>,
    ) -> Result<Self> {
        let expected = modes.len() * zones.len() * scheme.len();
        if counts.len() != expected {
            return Err(Error::Invalid(format!(
                "trip matrix has {} counts, expected {} modes x {} zones x {} bins = {expected}",
                counts.len(),
                modes.len(),
                zones.len(),
                scheme.len()
            )));
        }
        Ok(ModalTripMatrix {
            modes,
            zones,
            scheme,
            counts,
        })
    }

    pub fn modes(&self) -> &[String] {
        &self.modes
    }

    pub fn zones(&self) -> &[ZoneId] {
        &self.zones
    }

    pub fn scheme(&self) -> &DistanceBinScheme {
        &self.scheme
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn n_modes(&self) -> usize {
        self.modes.len()
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    pub fn n_bins(&self) -> usize {
        self.scheme.len()
    }

    pub fn mode_index(&self, mode: &str) -> Option<usize> {
        self.modes.iter().position(|m| m == mode)
    }

    pub fn zone_index(&self, zone: &ZoneId) -> Option<usize> {
        self.zones.iter().position(|z| z == zone)
    }

    #[inline]
    fn offset(&self, mode: usize, zone: usize, bin: usize) -> usize {
        (mode * self.zones.len() + zone) * self.scheme.len() + bin
    }

    #[inline]
    pub fn get(&self, mode: usize, zone: usize, bin: usize) -> f64 {
        self.counts[self.offset(mode, zone, bin)]
    }

    pub fn set(&mut self, mode: usize, zone: usize, bin: usize, value: f64) {
        let o = self.offset(mode, zone, bin);
        self.counts[o] = value;
    }

    pub fn add(&mut self, mode: usize, zone: usize, bin: usize, value: f64) {
        let o = self.offset(mode, zone, bin);
        self.counts[o] += value;
    }

    /// Trips of one mode from one zone, per bin.
    pub fn row(&self, mode: usize, zone: usize) -> &[f64] {
        let o = self.offset(mode, zone, 0);
        &self.counts[o..o + self.scheme.len()]
    }

    /// Total over bins for one (mode, zone).
    pub fn marginal(&self, mode: usize, zone: usize) -> f64 {
        self.row(mode, zone).iter().sum()
    }

    /// New matrix holding the given zones (by index, repeats allowed) in order.
    pub fn select_zones(&self, picks: &[usize]) -> ModalTripMatrix {
        let zones = picks.iter().map(|&z| self.zones[z].clone()).collect();
        let mut out = ModalTripMatrix::zeros(self.modes.clone(), zones, self.scheme.clone());
        for m in 0..self.modes.len() {
            for (new_z, &z) in picks.iter().enumerate() {
                let o = out.offset(m, new_z, 0);
                out.counts[o..o + self.scheme.len()].copy_from_slice(self.row(m, z));
            }
        }
        out
    }

    /// Elementwise `a * self + other`; shapes must agree.
    pub fn axpy(&self, a: f64, other: &ModalTripMatrix) -> Result<ModalTripMatrix> {
        if self.modes != other.modes || self.zones != other.zones || self.scheme != other.scheme {
            return Err(Error::Invalid("trip matrices differ in shape".into()));
        }
        let mut out = other.clone();
        for (o, &s) in out.counts.iter_mut().zip(&self.counts) {
            *o += a * s;
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Negative,
    NonFinite,
    DimensionMismatch,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Negative => "negative",
            ViolationKind::NonFinite => "non-finite",
            ViolationKind::DimensionMismatch => "dimension-mismatch",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub mode: Option<String>,
    pub zone: Option<String>,
    pub bin: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let (Some(m), Some(z), Some(b)) = (&self.mode, &self.zone, self.bin) {
            write!(f, " at (mode {m}, zone {z}, bin {b})")?;
        }
        write!(f, ": {}", self.detail)
    }
}

/// Lists every problem with a trip matrix; an empty list means it is valid.
pub fn validate_trip_matrix(matrix: &ModalTripMatrix) -> Vec<Violation> {
    let mut out = Vec::new();
    let expected = matrix.modes.len() * matrix.zones.len() * matrix.scheme.len();
    if matrix.counts.len() != expected {
        out.push(Violation {
            kind: ViolationKind::DimensionMismatch,
            mode: None,
            zone: None,
            bin: None,
            detail: format!("{} counts, expected {expected}", matrix.counts.len()),
        });
        return out;
    }
    for (m, mode) in matrix.modes.iter().enumerate() {
        for (z, zone) in matrix.zones.iter().enumerate() {
            for d in 0..matrix.scheme.len() {
                let v = matrix.get(m, z, d);
                let kind = if !v.is_finite() {
                    ViolationKind::NonFinite
                } else if v < 0.0 {
                    ViolationKind::Negative
                } else {
                    continue;
                };
                out.push(Violation {
                    kind,
                    mode: Some(mode.clone()),
                    zone: Some(zone.id.clone()),
                    bin: Some(d),
                    detail: format!("count {v}"),
                });
            }
        }
    }
    out
}

/// Average access and egress time for transit trips from/to a zone, hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitAccessProfile {
    pub zone: ZoneId,
    pub access_time: f64,
    pub egress_time: f64,
}

impl TransitAccessProfile {
    pub fn new(zone: ZoneId, access_time: f64, egress_time: f64) -> Result<Self> {
        for (name, t) in [("access", access_time), ("egress", egress_time)] {
            if !t.is_finite() || !(0.0..MAX_ACCESS_HOURS).contains(&t) {
                return Err(Error::Invalid(format!(
                    "zone `{}`: {name} time {t} h outside [0, {MAX_ACCESS_HOURS}) (minutes given as hours?)",
                    zone.id
                )));
            }
        }
        Ok(TransitAccessProfile {
            zone,
            access_time,
            egress_time,
        })
    }
}

/// Expected daily e-scooter trips for one zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandForecast {
    pub zone: ZoneId,
    pub trips: f64,
}

impl DemandForecast {
    pub fn new(zone: ZoneId, trips: f64) -> Result<Self> {
        if !trips.is_finite() || trips < 0.0 {
            return Err(Error::Invalid(format!(
                "zone `{}`: forecast {trips} must be finite and nonnegative",
                zone.id
            )));
        }
        Ok(DemandForecast { zone, trips })
    }
}
