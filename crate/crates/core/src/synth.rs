//! Synthetic scenarios with planted parameters, and an independent
//! re-implementation of the substitution objective for use as a test oracle.
//!
//! Nothing in here calls into [`crate::factor`]'s evaluation code; the
//! forward model below is written out separately so that agreement between
//! the two is meaningful.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::demand::DemandModelSpec;
use crate::error::{Error, Result};
use crate::factor::{DistanceBetas, FactorModelParams};
use crate::types::{
    DemandForecast, DistanceBinScheme, ModalTripMatrix, TransitAccessProfile, ZoneId, ZoneProfile,
};

/// Typical daily trips per zone and distance-decay rate (per mile) by mode.
fn mode_profile(mode: &str) -> (f64, f64) {
    match mode {
        "carpool" => (296.0, 0.35),
        "transit" => (5314.0, 0.20),
        "taxi" => (825.0, 0.45),
        "bike" => (350.0, 0.80),
        "walk" => (11162.0, 1.50),
        "auto" => (661.0, 0.30),
        "citibike" => (122.0, 0.90),
        _ => (500.0, 0.50),
    }
}

pub fn default_modes() -> Vec<String> {
    ["carpool", "transit", "taxi", "bike", "walk", "auto"]
        .map(String::from)
        .to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    /// Standard deviation of the log-space noise on observed ridership.
    pub log_sd: f64,
    /// Standard deviation of the additive noise on factor-model forecasts, trips.
    pub trip_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub n_zones: usize,
    pub modes: Vec<String>,
    pub transit_mode: String,
    pub scheme: DistanceBinScheme,
    pub demand_spec: DemandModelSpec,
    /// Intercept first, then one per predictor of `demand_spec`.
    pub planted_demand_coeffs: Vec<f64>,
    pub planted_factor_params: FactorModelParams,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl ScenarioConfig {
    /// 50 zones, six modes, 14 one-mile bins; demand coefficients from the
    /// four-term log-log model and a taxi/transit-access substitution pattern.
    pub fn standard(seed: u64) -> Self {
        let modes = default_modes();
        let mut params = FactorModelParams::zeros(&modes, crate::factor::BetaMode::Shared, 14);
        params.constant = 150.0;
        params.set_fraction("taxi", 0.05);
        params.distance_betas = DistanceBetas::Shared(0.1);
        params.access_coeffs = [0.0, 0.0, 0.004];
        ScenarioConfig {
            n_zones: 50,
            modes,
            transit_mode: "transit".into(),
            scheme: DistanceBinScheme::default(),
            demand_spec: DemandModelSpec::standard(),
            planted_demand_coeffs: vec![-138.579, 1.264, 16.137, -5.564, 28.383],
            planted_factor_params: params,
            noise: NoiseConfig {
                log_sd: 0.0,
                trip_sd: 0.0,
            },
            seed,
        }
    }

    /// Transit and taxi only, with the distance coefficient above the first
    /// bin's representative distance. The first bin then saturates, which
    /// separates the taxi fraction from the distance coefficient; a larger
    /// egress coefficient makes the access term visible above trip noise.
    pub fn taxi_transit(seed: u64, trip_sd: f64) -> Self {
        let modes: Vec<String> = ["transit", "taxi"].map(String::from).to_vec();
        let mut params = FactorModelParams::zeros(&modes, crate::factor::BetaMode::Shared, 14);
        params.constant = 150.0;
        params.set_fraction("taxi", 0.05);
        params.distance_betas = DistanceBetas::Shared(0.8);
        params.access_coeffs = [0.0, 0.0, 0.02];
        ScenarioConfig {
            modes,
            planted_factor_params: params,
            noise: NoiseConfig {
                log_sd: 0.0,
                trip_sd,
            },
            ..Self::standard(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_zones < 2 {
            return Err(Error::Invalid("scenario needs at least 2 zones".into()));
        }
        if !(self.noise.log_sd >= 0.0) || !(self.noise.trip_sd >= 0.0) {
            return Err(Error::Invalid("noise standard deviations must be >= 0".into()));
        }
        if self.planted_demand_coeffs.len() != self.demand_spec.predictors.len() + 1 {
            return Err(Error::Invalid(
                "planted demand coefficients must be intercept + one per predictor".into(),
            ));
        }
        if self.planted_factor_params.modes != self.modes {
            return Err(Error::Invalid("planted factor params must use the scenario modes".into()));
        }
        if let DistanceBetas::PerBin(b) = &self.planted_factor_params.distance_betas {
            if b.len() != self.scheme.len() {
                return Err(Error::Invalid("per-bin betas must match the scheme".into()));
            }
        }
        self.demand_spec.validate()?;
        self.planted_factor_params.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub profiles: Vec<ZoneProfile>,
    /// Observed ridership used to fit the demand model.
    pub observed: BTreeMap<ZoneId, f64>,
    pub trips: ModalTripMatrix,
    pub access: Vec<TransitAccessProfile>,
    /// Targets for the substitution model.
    pub forecasts: Vec<DemandForecast>,
    /// Noiseless substitution-model output per zone.
    pub clean_forecasts: Vec<f64>,
}

/// Draws a complete scenario; identical configs give identical scenarios.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let zones: Vec<ZoneId> = (1..=config.n_zones)
        .map(|i| ZoneId::new(format!("{i}"), "taz"))
        .collect::<Result<_>>()?;

    let profiles: Vec<ZoneProfile> = zones
        .iter()
        .map(|z| {
            let area = rng.random_range(0.05..0.6);
            let density = (rng.random_range(8.0f64..11.5)).exp();
            ZoneProfile {
                zone: z.clone(),
                population: density * area,
                area,
                density,
                median_age: rng.random_range(28.0..50.0),
                age_ratio_20_40: rng.random_range(0.2..0.55),
                labor_rate: rng.random_range(55.0..80.0),
                median_income: (rng.random_range(10.3f64..11.9)).exp(),
                health_insurance_rate: rng.random_range(82.0..99.0),
                unemployment_rate: rng.random_range(2.0..10.0),
                extra: BTreeMap::new(),
            }
        })
        .collect();

    let log_noise = Normal::new(0.0, config.noise.log_sd).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut observed = BTreeMap::new();
    for p in &profiles {
        let mut eta = config.planted_demand_coeffs[0];
        for (pred, b) in config.demand_spec.predictors.iter().zip(&config.planted_demand_coeffs[1..]) {
            eta += b * pred.value(p)?.ln();
        }
        observed.insert(p.zone.clone(), (eta + log_noise.sample(&mut rng)).exp());
    }

    let scheme = &config.scheme;
    let mut trips = ModalTripMatrix::zeros(config.modes.clone(), zones.clone(), scheme.clone());
    let bin_jitter = LogNormal::new(0.0, 0.3).unwrap();
    for (m, mode) in config.modes.iter().enumerate() {
        let (mean, decay) = mode_profile(mode);
        let sigma: f64 = 0.8;
        let total_dist = LogNormal::new(mean.ln() - 0.5 * sigma * sigma, sigma).unwrap();
        for z in 0..zones.len() {
            let total = total_dist.sample(&mut rng);
            let weights: Vec<f64> = scheme
                .deltas()
                .iter()
                .map(|&d| (-decay * d).exp() * bin_jitter.sample(&mut rng))
                .collect();
            let wsum: f64 = weights.iter().sum();
            for (d, w) in weights.iter().enumerate() {
                trips.set(m, z, d, total * w / wsum);
            }
        }
    }

    let access: Vec<TransitAccessProfile> = zones
        .iter()
        .map(|z| {
            TransitAccessProfile::new(z.clone(), rng.random_range(0.03..0.2), rng.random_range(0.03..0.15))
        })
        .collect::<Result<_>>()?;

    let clean = forward_substitution(
        &config.planted_factor_params,
        &trips,
        &access,
        &config.transit_mode,
    );
    let trip_noise = Normal::new(0.0, config.noise.trip_sd).map_err(|e| Error::Invalid(e.to_string()))?;
    let forecasts = zones
        .iter()
        .zip(&clean)
        .map(|(z, &c)| DemandForecast::new(z.clone(), (c + trip_noise.sample(&mut rng)).max(0.0)))
        .collect::<Result<_>>()?;

    Ok(Scenario {
        profiles,
        observed,
        trips,
        access,
        forecasts,
        clean_forecasts: clean,
    })
}

/// Direct evaluation of the substitution model, zone by zone, bin by bin.
pub fn forward_substitution(
    params: &FactorModelParams,
    trips: &ModalTripMatrix,
    access: &[TransitAccessProfile],
    transit_mode: &str,
) -> Vec<f64> {
    let scheme = trips.scheme();
    let mut out = Vec::with_capacity(trips.n_zones());
    for (z, zone) in trips.zones().iter().enumerate() {
        let profile = access.iter().find(|a| &a.zone == zone);
        let (ta, te) = profile.map_or((0.0, 0.0), |a| (a.access_time, a.egress_time));
        let affine = params.access_coeffs[0] + params.access_coeffs[1] * ta + params.access_coeffs[2] * te;
        let fprime = affine.clamp(0.0, 1.0);
        let mut r = params.constant;
        for d in 0..scheme.len() {
            let beta = match &params.distance_betas {
                DistanceBetas::Shared(b) => *b,
                DistanceBetas::PerBin(bs) => bs[d],
            };
            let p = (beta / scheme.deltas()[d]).clamp(0.0, 1.0);
            for (m, mode) in trips.modes().iter().enumerate() {
                let n = trips.counts()[(m * trips.n_zones() + z) * scheme.len() + d];
                r += params.mode_fractions[m] * p * n;
                if mode == transit_mode {
                    r += (1.0 - p) * fprime * n;
                }
            }
        }
        out.push(r);
    }
    out
}

/// Sum of squared gaps between forecasts and the model, evaluated with
/// [`forward_substitution`]. Forecasts are matched to matrix zones by id.
pub fn brute_force_objective(
    params: &FactorModelParams,
    forecasts: &[DemandForecast],
    trips: &ModalTripMatrix,
    access: &[TransitAccessProfile],
    transit_mode: &str,
) -> f64 {
    let model = forward_substitution(params, trips, access, transit_mode);
    trips
        .zones()
        .iter()
        .zip(model)
        .map(|(zone, r_sub)| {
            let r_est = forecasts
                .iter()
                .find(|f| &f.zone == zone)
                .map_or(f64::NAN, |f| f.trips);
            (r_est - r_sub).powi(2)
        })
        .sum()
}
