//! Multifactor substitution model.
//!
//! Forecast e-scooter demand per zone is explained as
//!
//! ```text
//! R_sub,i = C + sum_m F_m sum_d P_d N[m,i,d] + sum_d (1 - P_d) F'_i N[pt,i,d]
//! P_d     = min(1, beta_d / delta_d)
//! F'_i    = min(1, b0 + b1 * access_i + b2 * egress_i)
//! ```
//!
//! where the first sum is direct substitution of whole trips and the second
//! is substitution of the access/egress legs of public transit trips. The
//! parameters are calibrated by box-constrained least squares against the
//! zonal forecasts and their uncertainty is estimated by resampling zones.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{self, BoundedProblem, LeastSquaresProblem, SolverConfig};
use crate::stats;
use crate::types::{DemandForecast, DistanceBinScheme, ModalTripMatrix, TransitAccessProfile, ZoneId};

pub const DEFAULT_TRANSIT_MODE: &str = "transit";
pub const DEFAULT_MULTI_STARTS: usize = 8;
/// Replicates may fail to converge up to this fraction before bootstrap gives up.
pub const MAX_BOOTSTRAP_FAILURE_RATE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BetaMode {
    /// One distance coefficient for every bin.
    #[default]
    Shared,
    /// One distance coefficient per bin.
    PerBin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceBetas {
    Shared(f64),
    PerBin(Vec<f64>),
}

impl DistanceBetas {
    pub fn mode(&self) -> BetaMode {
        match self {
            DistanceBetas::Shared(_) => BetaMode::Shared,
            DistanceBetas::PerBin(_) => BetaMode::PerBin,
        }
    }

    pub fn for_bin(&self, bin: usize) -> f64 {
        match self {
            DistanceBetas::Shared(b) => *b,
            DistanceBetas::PerBin(bs) => bs[bin],
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            DistanceBetas::Shared(b) => vec![*b],
            DistanceBetas::PerBin(bs) => bs.clone(),
        }
    }
}

/// Calibrated parameters: constant, per-mode fractions, distance coefficients
/// and the three access-fraction coefficients (intercept, per access hour,
/// per egress hour).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorModelParams {
    pub constant: f64,
    pub modes: Vec<String>,
    pub mode_fractions: Vec<f64>,
    pub distance_betas: DistanceBetas,
    pub access_coeffs: [f64; 3],
}

impl FactorModelParams {
    /// All-zero parameters for the given modes.
    pub fn zeros(modes: &[String], beta_mode: BetaMode, n_bins: usize) -> Self {
        FactorModelParams {
            constant: 0.0,
            modes: modes.to_vec(),
            mode_fractions: vec![0.0; modes.len()],
            distance_betas: match beta_mode {
                BetaMode::Shared => DistanceBetas::Shared(0.0),
                BetaMode::PerBin => DistanceBetas::PerBin(vec![0.0; n_bins]),
            },
            access_coeffs: [0.0; 3],
        }
    }

    pub fn fraction(&self, mode: &str) -> Option<f64> {
        self.modes
            .iter()
            .position(|m| m == mode)
            .map(|i| self.mode_fractions[i])
    }

    pub fn set_fraction(&mut self, mode: &str, value: f64) {
        if let Some(i) = self.modes.iter().position(|m| m == mode) {
            self.mode_fractions[i] = value;
        }
    }

    pub fn has_access_terms(&self) -> bool {
        self.access_coeffs.iter().any(|&b| b != 0.0)
    }

    /// Checks the box constraints.
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Invalid(format!("parameter out of bounds: {what}")));
        if !(self.constant >= 0.0) || !self.constant.is_finite() {
            return bad(format!("C = {}", self.constant));
        }
        if self.modes.len() != self.mode_fractions.len() {
            return Err(Error::Invalid("one fraction per mode required".into()));
        }
        for (m, f) in self.modes.iter().zip(&self.mode_fractions) {
            if !(0.0..=1.0).contains(f) {
                return bad(format!("F_{m} = {f}"));
            }
        }
        for b in self.distance_betas.values() {
            if !(b >= 0.0) || !b.is_finite() {
                return bad(format!("distance beta = {b}"));
            }
        }
        for b in self.access_coeffs {
            if !(b >= 0.0) || !b.is_finite() {
                return bad(format!("access coefficient = {b}"));
            }
        }
        Ok(())
    }

    /// Flattened parameter vector: `[C, F_m.., beta.., b0, b1, b2]`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = vec![self.constant];
        v.extend_from_slice(&self.mode_fractions);
        v.extend(self.distance_betas.values());
        v.extend_from_slice(&self.access_coeffs);
        v
    }

    /// Inverse of [`to_vector`](Self::to_vector), using `self` for shape.
    pub fn with_vector(&self, v: &[f64]) -> Self {
        let m = self.modes.len();
        let nb = self.distance_betas.values().len();
        assert_eq!(v.len(), 1 + m + nb + 3, "parameter vector length");
        let betas = &v[1 + m..1 + m + nb];
        FactorModelParams {
            constant: v[0],
            modes: self.modes.clone(),
            mode_fractions: v[1..1 + m].to_vec(),
            distance_betas: match self.distance_betas {
                DistanceBetas::Shared(_) => DistanceBetas::Shared(betas[0]),
                DistanceBetas::PerBin(_) => DistanceBetas::PerBin(betas.to_vec()),
            },
            access_coeffs: [v[1 + m + nb], v[2 + m + nb], v[3 + m + nb]],
        }
    }

    /// Display names aligned with [`to_vector`](Self::to_vector).
    pub fn names(&self) -> Vec<String> {
        let mut names = vec!["C".to_string()];
        names.extend(self.modes.iter().map(|m| format!("F_{m}")));
        match &self.distance_betas {
            DistanceBetas::Shared(_) => names.push("beta_d".into()),
            DistanceBetas::PerBin(bs) => names.extend((0..bs.len()).map(|d| format!("beta_d[{d}]"))),
        }
        names.extend(["beta_0", "beta_1", "beta_2"].map(String::from));
        names
    }

    /// Lower and upper bounds aligned with [`to_vector`](Self::to_vector).
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.to_vector().len();
        let m = self.modes.len();
        let lower = vec![0.0; n];
        let mut upper = vec![f64::INFINITY; n];
        for u in &mut upper[1..1 + m] {
            *u = 1.0;
        }
        (lower, upper)
    }
}

/// Share of trips in a distance bin that compete with e-scooters.
pub fn competition_share(params: &FactorModelParams, bin: usize, scheme: &DistanceBinScheme) -> f64 {
    (params.distance_betas.for_bin(bin) / scheme.delta(bin)).clamp(0.0, 1.0)
}

/// Fraction of a zone's transit trips whose access/egress leg is substituted.
pub fn access_fraction(params: &FactorModelParams, profile: &TransitAccessProfile) -> f64 {
    let [b0, b1, b2] = params.access_coeffs;
    (b0 + b1 * profile.access_time + b2 * profile.egress_time).clamp(0.0, 1.0)
}

/// Model output for one zone with its additive decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionPrediction {
    pub zone: ZoneId,
    pub total: f64,
    /// Direct substitution, `[mode][bin]`, modes in matrix order.
    pub breakdown: Vec<Vec<f64>>,
    /// Access/egress substitution per bin.
    pub access_breakdown: Vec<f64>,
    pub constant_share: f64,
    /// Access fraction applied in this zone.
    pub access_fraction: f64,
}

impl SubstitutionPrediction {
    pub fn direct_total(&self) -> f64 {
        self.breakdown.iter().flatten().sum()
    }

    pub fn access_total(&self) -> f64 {
        self.access_breakdown.iter().sum()
    }
}

fn check_param_modes(params: &FactorModelParams, trips: &ModalTripMatrix) -> Result<()> {
    if params.modes.as_slice() != trips.modes() {
        return Err(Error::Invalid(format!(
            "parameter modes {:?} do not match trip matrix modes {:?}",
            params.modes,
            trips.modes()
        )));
    }
    if let DistanceBetas::PerBin(bs) = &params.distance_betas {
        if bs.len() != trips.n_bins() {
            return Err(Error::Invalid(format!(
                "{} per-bin betas for {} distance bins",
                bs.len(),
                trips.n_bins()
            )));
        }
    }
    Ok(())
}

/// Evaluates the model for every zone of `trips`.
pub fn predict_substitution(
    params: &FactorModelParams,
    trips: &ModalTripMatrix,
    access: &[TransitAccessProfile],
    transit_mode: &str,
) -> Result<Vec<SubstitutionPrediction>> {
    check_param_modes(params, trips)?;
    let pt = trips.mode_index(transit_mode);
    if params.has_access_terms() && pt.is_none() {
        return Err(Error::UnknownMode(format!(
            "{transit_mode} (required by nonzero access coefficients)"
        )));
    }
    let by_zone: BTreeMap<&ZoneId, &TransitAccessProfile> = access.iter().map(|a| (&a.zone, a)).collect();
    let scheme = trips.scheme();
    let shares: Vec<f64> = (0..scheme.len()).map(|d| competition_share(params, d, scheme)).collect();

    trips
        .zones()
        .iter()
        .enumerate()
        .map(|(z, zone)| {
            let fp = match (by_zone.get(zone), params.has_access_terms()) {
                (Some(a), _) => access_fraction(params, a),
                (None, false) => 0.0,
                (None, true) => {
                    return Err(Error::ZoneMismatch(format!(
                        "zone `{}` has no transit access profile",
                        zone.id
                    )))
                }
            };
            let breakdown: Vec<Vec<f64>> = (0..trips.n_modes())
                .map(|m| {
                    let f = params.mode_fractions[m];
                    trips.row(m, z).iter().zip(&shares).map(|(n, p)| f * p * n).collect()
                })
                .collect();
            let access_breakdown: Vec<f64> = match pt {
                Some(pt) => trips
                    .row(pt, z)
                    .iter()
                    .zip(&shares)
                    .map(|(n, p)| (1.0 - p) * fp * n)
                    .collect(),
                None => vec![0.0; scheme.len()],
            };
            let total = params.constant
                + breakdown.iter().flatten().sum::<f64>()
                + access_breakdown.iter().sum::<f64>();
            Ok(SubstitutionPrediction {
                zone: zone.clone(),
                total,
                breakdown,
                access_breakdown,
                constant_share: params.constant,
                access_fraction: fp,
            })
        })
        .collect()
}

/// Calibration data aligned by zone index.
#[derive(Debug, Clone)]
pub struct FactorData {
    zones: Vec<ZoneId>,
    targets: Vec<f64>,
    trips: ModalTripMatrix,
    /// (access, egress) hours per zone.
    times: Vec<(f64, f64)>,
    transit: Option<usize>,
}

impl FactorData {
    /// Aligns forecasts and access profiles to the zone order of `trips`.
    /// The three inputs must cover the same zones; access profiles may be
    /// omitted only when the matrix has no transit mode.
    pub fn new(
        forecasts: &[DemandForecast],
        trips: &ModalTripMatrix,
        access: &[TransitAccessProfile],
        transit_mode: &str,
    ) -> Result<Self> {
        let transit = trips.mode_index(transit_mode);
        let fc: BTreeMap<&ZoneId, f64> = forecasts.iter().map(|f| (&f.zone, f.trips)).collect();
        let ac: BTreeMap<&ZoneId, &TransitAccessProfile> = access.iter().map(|a| (&a.zone, a)).collect();
        if fc.len() != forecasts.len() {
            return Err(Error::ZoneMismatch("duplicate zone in forecasts".into()));
        }
        if trips.n_zones() < 2 {
            return Err(Error::Invalid("calibration needs at least 2 zones".into()));
        }
        let matrix_zones: std::collections::BTreeSet<&ZoneId> = trips.zones().iter().collect();
        if let Some(z) = forecasts.iter().find(|f| !matrix_zones.contains(&f.zone)) {
            return Err(Error::ZoneMismatch(format!(
                "forecast zone `{}` absent from trip matrix",
                z.zone.id
            )));
        }
        if let Some(a) = access.iter().find(|a| !matrix_zones.contains(&a.zone)) {
            return Err(Error::ZoneMismatch(format!(
                "access zone `{}` absent from trip matrix",
                a.zone.id
            )));
        }
        let mut targets = Vec::with_capacity(trips.n_zones());
        let mut times = Vec::with_capacity(trips.n_zones());
        for zone in trips.zones() {
            let t = fc.get(zone).ok_or_else(|| {
                Error::ZoneMismatch(format!("trip-matrix zone `{}` has no forecast", zone.id))
            })?;
            targets.push(*t);
            match ac.get(zone) {
                Some(a) => times.push((a.access_time, a.egress_time)),
                None if transit.is_none() => times.push((0.0, 0.0)),
                None => {
                    return Err(Error::ZoneMismatch(format!(
                        "trip-matrix zone `{}` has no transit access profile",
                        zone.id
                    )))
                }
            }
        }
        Ok(FactorData {
            zones: trips.zones().to_vec(),
            targets,
            trips: trips.clone(),
            times,
            transit,
        })
    }

    pub fn zones(&self) -> &[ZoneId] {
        &self.zones
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn trips(&self) -> &ModalTripMatrix {
        &self.trips
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    /// Dataset made of the given zone indices (with repetition).
    pub fn resample(&self, picks: &[usize]) -> FactorData {
        FactorData {
            zones: picks.iter().map(|&i| self.zones[i].clone()).collect(),
            targets: picks.iter().map(|&i| self.targets[i]).collect(),
            trips: self.trips.select_zones(picks),
            times: picks.iter().map(|&i| self.times[i]).collect(),
            transit: self.transit,
        }
    }
}

/// Least-squares objective over a [`FactorData`] set, in flattened parameters.
pub struct FactorObjective<'a> {
    data: &'a FactorData,
    template: FactorModelParams,
    lower: Vec<f64>,
    upper: Vec<f64>,
    n_betas: usize,
}

impl<'a> FactorObjective<'a> {
    pub fn new(data: &'a FactorData, beta_mode: BetaMode) -> Self {
        let template = FactorModelParams::zeros(data.trips.modes(), beta_mode, data.trips.n_bins());
        let (lower, mut upper) = template.bounds();
        let n = upper.len();
        if data.transit.is_none() {
            // access coefficients are unidentified without transit trips
            for u in &mut upper[n - 3..] {
                *u = 0.0;
            }
        }
        let n_betas = match beta_mode {
            BetaMode::Shared => 1,
            BetaMode::PerBin => data.trips.n_bins(),
        };
        FactorObjective {
            data,
            template,
            lower,
            upper,
            n_betas,
        }
    }

    pub fn template(&self) -> &FactorModelParams {
        &self.template
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Model predictions per zone and, optionally, the Jacobian of the
    /// predictions (row-major, zones x parameters).
    pub fn predictions(&self, x: &[f64], want_jacobian: bool) -> (Vec<f64>, Vec<f64>) {
        let trips = &self.data.trips;
        let scheme = trips.scheme();
        let n_modes = trips.n_modes();
        let n_bins = trips.n_bins();
        let dim = self.dim();
        let c = x[0];
        let fractions = &x[1..1 + n_modes];
        let betas = &x[1 + n_modes..1 + n_modes + self.n_betas];
        let acc = &x[1 + n_modes + self.n_betas..];
        let beta_col = 1 + n_modes;
        let acc_col = beta_col + self.n_betas;

        let mut share = vec![0.0; n_bins];
        let mut share_slope = vec![0.0; n_bins];
        for d in 0..n_bins {
            let b = if self.n_betas == 1 { betas[0] } else { betas[d] };
            let raw = b / scheme.delta(d);
            share[d] = raw.clamp(0.0, 1.0);
            share_slope[d] = if raw < 1.0 { 1.0 / scheme.delta(d) } else { 0.0 };
        }

        let n_zones = trips.n_zones();
        let mut pred = vec![0.0; n_zones];
        let mut jac = if want_jacobian { vec![0.0; n_zones * dim] } else { Vec::new() };
        let mut weighted = vec![0.0; n_bins];
        for z in 0..n_zones {
            let (ta, te) = self.data.times[z];
            let raw_fp = acc[0] + acc[1] * ta + acc[2] * te;
            let fp = raw_fp.clamp(0.0, 1.0);
            weighted.iter_mut().for_each(|w| *w = 0.0);
            let mut total = c;
            for m in 0..n_modes {
                let row = trips.row(m, z);
                let mut exposed = 0.0;
                for d in 0..n_bins {
                    exposed += share[d] * row[d];
                    weighted[d] += fractions[m] * row[d];
                }
                total += fractions[m] * exposed;
                if want_jacobian {
                    jac[z * dim + 1 + m] = exposed;
                }
            }
            let mut access_base = 0.0;
            if let Some(pt) = self.data.transit {
                let row = trips.row(pt, z);
                for d in 0..n_bins {
                    access_base += (1.0 - share[d]) * row[d];
                }
                total += fp * access_base;
            }
            pred[z] = total;
            if want_jacobian {
                let jrow = &mut jac[z * dim..(z + 1) * dim];
                jrow[0] = 1.0;
                let pt_row = self.data.transit.map(|pt| trips.row(pt, z));
                for d in 0..n_bins {
                    let pt_n = pt_row.map_or(0.0, |r| r[d]);
                    let g = share_slope[d] * (weighted[d] - fp * pt_n);
                    let col = if self.n_betas == 1 { beta_col } else { beta_col + d };
                    jrow[col] += g;
                }
                if raw_fp < 1.0 {
                    jrow[acc_col] = access_base;
                    jrow[acc_col + 1] = access_base * ta;
                    jrow[acc_col + 2] = access_base * te;
                }
            }
        }
        (pred, jac)
    }

    /// Residuals `R_est - R_sub` per zone.
    pub fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let (pred, _) = self.predictions(x, false);
        self.data.targets.iter().zip(pred).map(|(t, p)| t - p).collect()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.residuals(x).iter().map(|r| r * r).sum()
    }
}

impl BoundedProblem for FactorObjective<'_> {
    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let dim = self.dim();
        let (pred, jac) = self.predictions(x, true);
        let mut f = 0.0;
        let mut g = vec![0.0; dim];
        for (z, (t, p)) in self.data.targets.iter().zip(&pred).enumerate() {
            let r = t - p;
            f += r * r;
            for (gj, jj) in g.iter_mut().zip(&jac[z * dim..(z + 1) * dim]) {
                *gj -= 2.0 * r * jj;
            }
        }
        (f, g)
    }
}

impl LeastSquaresProblem for FactorObjective<'_> {
    fn lower(&self) -> &[f64] {
        &self.lower
    }

    fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Residuals `R_sub - R_est` and their Jacobian.
    fn residuals_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (pred, jac) = self.predictions(x, true);
        let r = pred.iter().zip(&self.data.targets).map(|(p, t)| p - t).collect();
        (r, jac)
    }
}

/// Calibration settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorConfig {
    pub beta_mode: BetaMode,
    pub transit_mode: String,
    /// Random feasible starts tried after the deterministic one.
    pub multi_starts: usize,
    pub seed: u64,
    pub solver: SolverConfig,
}

impl Default for FactorConfig {
    fn default() -> Self {
        FactorConfig {
            beta_mode: BetaMode::Shared,
            transit_mode: DEFAULT_TRANSIT_MODE.into(),
            multi_starts: DEFAULT_MULTI_STARTS,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub start: usize,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: FactorModelParams,
    pub objective: f64,
    /// Objective at the deterministic start (C = mean forecast, rest 0).
    pub initial_objective: f64,
    pub zones: Vec<ZoneId>,
    /// `R_est - R_sub` per zone.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    /// Index of the winning start (0 = deterministic).
    pub best_start: usize,
    pub starts: Vec<StartRecord>,
}

/// Deterministic starting point: constant at the mean forecast, all else 0.
pub fn initial_point(objective: &FactorObjective<'_>) -> Vec<f64> {
    let mut x = vec![0.0; objective.dim()];
    x[0] = stats::mean(objective.data.targets());
    x
}

fn random_start(objective: &FactorObjective<'_>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let data = objective.data;
    let n_modes = data.trips.n_modes();
    let mean = stats::mean(data.targets());
    let mut x = Vec::with_capacity(objective.dim());
    x.push(rng.random_range(0.0..=2.0 * mean.max(1.0)));
    for _ in 0..n_modes {
        x.push(rng.random_range(0.0..=0.1));
    }
    let max_delta = data.trips.scheme().delta(0);
    for _ in 0..objective.n_betas {
        x.push(rng.random_range(0.0..=2.0 * max_delta));
    }
    x.push(rng.random_range(0.0..=0.01));
    x.push(rng.random_range(0.0..=0.05));
    x.push(rng.random_range(0.0..=0.05));
    solver::project(&mut x, &objective.lower, &objective.upper);
    x
}

fn finish(objective: &FactorObjective<'_>, report: solver::SolveReport, initial: f64, best_start: usize, starts: Vec<StartRecord>) -> FitResult {
    let residuals = objective.residuals(&report.x);
    FitResult {
        params: objective.template.with_vector(&report.x),
        objective: residuals.iter().map(|r| r * r).sum(),
        initial_objective: initial,
        zones: objective.data.zones.clone(),
        residuals,
        iterations: report.iterations,
        converged: report.converged,
        gradient_norm: report.projected_gradient_norm,
        best_start,
        starts,
    }
}

/// Calibrates the model by bounded least squares with multiple starts.
pub fn fit(data: &FactorData, config: &FactorConfig) -> Result<FitResult> {
    let objective = FactorObjective::new(data, config.beta_mode);
    let x0 = initial_point(&objective);
    let initial = objective.value(&x0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts_x = vec![x0];
    for _ in 0..config.multi_starts {
        starts_x.push(random_start(&objective, &mut rng));
    }
    let mut best: Option<(usize, solver::SolveReport)> = None;
    let mut records = Vec::with_capacity(starts_x.len());
    for (i, x) in starts_x.iter().enumerate() {
        let report = solver::minimize_least_squares(&objective, x, &config.solver)?;
        records.push(StartRecord {
            start: i,
            objective: report.value,
            iterations: report.iterations,
            converged: report.converged,
        });
        let better = match &best {
            None => true,
            Some((_, b)) => report.value < b.value - 1e-9 * b.value.abs().max(1.0),
        };
        if better {
            best = Some((i, report));
        }
    }
    let (best_start, report) = best.expect("at least one start");
    Ok(finish(&objective, report, initial, best_start, records))
}

/// Single-start refit from a given parameter set.
pub fn refit_from(data: &FactorData, start: &FactorModelParams, config: &FactorConfig) -> Result<FitResult> {
    let objective = FactorObjective::new(data, start.distance_betas.mode());
    let x0 = start.to_vector();
    let initial = objective.value(&initial_point(&objective));
    let report = solver::minimize_least_squares(&objective, &x0, &config.solver)?;
    let records = vec![StartRecord {
        start: 0,
        objective: report.value,
        iterations: report.iterations,
        converged: report.converged,
    }];
    Ok(finish(&objective, report, initial, 0, records))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInterval {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub parameters: Vec<ParameterInterval>,
    pub replicates: usize,
    pub seed: u64,
    pub ci_level: f64,
    /// Indices of replicates excluded for failing to converge.
    pub failed: Vec<usize>,
    /// Parameter vectors of the successful replicates, in replicate order.
    pub samples: Vec<Vec<f64>>,
}

impl BootstrapSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterInterval> {
        self.parameters.iter().find(|p| p.name == name)
    }

    /// Plain text coefficient summary.
    pub fn table(&self) -> String {
        let pct = (self.ci_level * 100.0).round();
        let mut s = format!(
            "{:<14}{:>12}{:>24}{:>12}{:>12}\n",
            "Variable",
            "Coefficient",
            "Bootstrap Std Error",
            format!("CI{pct} low"),
            format!("CI{pct} high")
        );
        for p in &self.parameters {
            s.push_str(&format!(
                "{:<14}{:>12.3}{:>24.3}{:>12.3}{:>12.3}\n",
                p.name, p.estimate, p.std_error, p.lower, p.upper
            ));
        }
        s.push_str(&format!(
            "replicates: {} ({} failed), seed: {}\n",
            self.replicates,
            self.failed.len(),
            self.seed
        ));
        s
    }
}

/// Settings for zone-resampling inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub seed: u64,
    pub ci_level: f64,
    /// Worker threads; 1 runs serially.
    pub workers: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            replicates: 40,
            seed: 0,
            ci_level: 0.90,
            workers: 1,
        }
    }
}

/// Zone indices for one replicate, determined by `(seed, replicate)` alone.
pub fn replicate_indices(seed: u64, replicate: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Resamples zones with replacement, refits each replicate from the full-data
/// solution and summarises the spread of every parameter.
pub fn bootstrap(
    fitted: &FitResult,
    data: &FactorData,
    fit_config: &FactorConfig,
    config: &BootstrapConfig,
) -> Result<(BootstrapSummary, Vec<String>)> {
    if config.replicates < 2 {
        return Err(Error::Invalid("bootstrap needs at least 2 replicates".into()));
    }
    if !(config.ci_level > 0.0 && config.ci_level < 1.0) {
        return Err(Error::Invalid(format!("ci level {} outside (0, 1)", config.ci_level)));
    }
    let run = |r: usize| -> Result<FitResult> {
        let picks = replicate_indices(config.seed, r, data.n_zones());
        refit_from(&data.resample(&picks), &fitted.params, fit_config)
    };
    let results: Vec<Result<FitResult>> = if config.workers <= 1 {
        (0..config.replicates).map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
        pool.install(|| (0..config.replicates).into_par_iter().map(run).collect())
    };

    let mut warnings = Vec::new();
    let mut failed = Vec::new();
    let mut samples = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(fit) if fit.converged => samples.push(fit.params.to_vector()),
            Ok(fit) => {
                warnings.push(format!(
                    "bootstrap replicate {r} did not converge after {} iterations; excluded",
                    fit.iterations
                ));
                failed.push(r);
            }
            Err(e) if e.is_numerical() => {
                warnings.push(format!("bootstrap replicate {r} failed: {e}; excluded"));
                failed.push(r);
            }
            Err(e) => return Err(e),
        }
    }
    if failed.len() as f64 > MAX_BOOTSTRAP_FAILURE_RATE * config.replicates as f64 || samples.len() < 2 {
        return Err(Error::BootstrapFailures {
            failed: failed.len(),
            total: config.replicates,
        });
    }

    let tail = (1.0 - config.ci_level) / 2.0;
    let point = fitted.params.to_vector();
    let parameters = fitted
        .params
        .names()
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let mut column: Vec<f64> = samples.iter().map(|s| s[j]).collect();
            let std_error = stats::sample_std(&column);
            column.sort_by(f64::total_cmp);
            ParameterInterval {
                name,
                estimate: point[j],
                std_error,
                lower: stats::quantile(&column, tail),
                upper: stats::quantile(&column, 1.0 - tail),
            }
        })
        .collect();
    Ok((
        BootstrapSummary {
            parameters,
            replicates: config.replicates,
            seed: config.seed,
            ci_level: config.ci_level,
            failed,
            samples,
        },
        warnings,
    ))
}
