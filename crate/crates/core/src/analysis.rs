//! Shares of existing trips substituted, and fare revenue by distance.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::SubstitutionPrediction;
use crate::ingest::format_sig6;
use crate::types::{DistanceBinScheme, ModalTripMatrix, TransitAccessProfile, ZoneId};

pub const DAYS_PER_YEAR: f64 = 365.0;
/// Bike-like riding speed, mph.
pub const DEFAULT_SPEED_MPH: f64 = 10.0;
/// Market-wide average ride duration, minutes.
pub const DEFAULT_AVERAGE_DURATION_MIN: f64 = 12.0;
/// Label used for the transit access/egress category in reports.
pub const ACCESS_LABEL: &str = "transit_access";

/// Per-ride fare: `base + per_minute * minutes`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FareSchedule {
    pub base: f64,
    pub per_minute: f64,
}

impl Default for FareSchedule {
    fn default() -> Self {
        FareSchedule {
            base: 1.00,
            per_minute: 0.15,
        }
    }
}

impl FareSchedule {
    pub fn new(base: f64, per_minute: f64) -> Result<Self> {
        if !(base >= 0.0) || !(per_minute >= 0.0) {
            return Err(Error::Invalid(format!(
                "fare components must be nonnegative (base {base}, per minute {per_minute})"
            )));
        }
        Ok(FareSchedule { base, per_minute })
    }

    pub fn fare(&self, minutes: f64) -> f64 {
        self.base + self.per_minute * minutes
    }
}

/// Ride time in minutes at a constant speed.
pub fn trip_duration(distance_mi: f64, speed_mph: f64) -> f64 {
    60.0 * distance_mi / speed_mph
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketRevenue {
    pub daily: f64,
    pub annual: f64,
}

pub fn annualize(daily: f64) -> f64 {
    DAYS_PER_YEAR * daily
}

/// Revenue if every trip lasts `avg_duration` minutes.
pub fn market_revenue(total_trips: f64, avg_duration: f64, fare: &FareSchedule) -> MarketRevenue {
    let daily = total_trips * fare.fare(avg_duration);
    MarketRevenue {
        daily,
        annual: annualize(daily),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRevenue {
    pub bin: usize,
    pub label: String,
    /// Direct-substitution revenue per mode, in mode order.
    pub direct: Vec<f64>,
    pub access: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueAssumptions {
    pub speed_mph: f64,
    pub average_duration_min: f64,
    pub fare: FareSchedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueReport {
    pub modes: Vec<String>,
    pub by_distance: Vec<BinRevenue>,
    /// Revenue from the constant share, at the average duration.
    pub unattributed_daily: f64,
    pub direct_daily: f64,
    pub access_daily: f64,
    pub total_daily: f64,
    pub total_annual: f64,
    pub assumptions: RevenueAssumptions,
}

impl RevenueReport {
    /// Direct revenue for one mode summed over bins.
    pub fn mode_daily(&self, mode: &str) -> Option<f64> {
        let m = self.modes.iter().position(|x| x == mode)?;
        Some(self.by_distance.iter().map(|b| b.direct[m]).sum())
    }

    /// `bin,category,daily_dollars` rows, six significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin,category,daily_dollars\n");
        for b in &self.by_distance {
            for (mode, v) in self.modes.iter().zip(&b.direct) {
                s.push_str(&format!("{},{},{}\n", b.label, mode, format_sig6(*v)));
            }
            s.push_str(&format!("{},{},{}\n", b.label, ACCESS_LABEL, format_sig6(b.access)));
        }
        s.push_str(&format!("all,unattributed,{}\n", format_sig6(self.unattributed_daily)));
        s
    }
}

/// Prices every substituted trip.
///
/// Direct trips ride the bin's representative distance at `speed_mph`.
/// Access/egress trips ride the zone's access plus egress time, capped at
/// the direct duration for the same bin. The constant share is priced at
/// `average_duration_min` and reported separately.
pub fn substitution_revenue(
    predictions: &[SubstitutionPrediction],
    modes: &[String],
    scheme: &DistanceBinScheme,
    access: &[TransitAccessProfile],
    fare: &FareSchedule,
    speed_mph: f64,
    average_duration_min: f64,
) -> Result<RevenueReport> {
    if !(speed_mph > 0.0) {
        return Err(Error::Invalid(format!("speed must be positive, got {speed_mph}")));
    }
    let times: BTreeMap<&ZoneId, f64> = access
        .iter()
        .map(|a| (&a.zone, 60.0 * (a.access_time + a.egress_time)))
        .collect();
    let direct_fare: Vec<f64> = scheme
        .deltas()
        .iter()
        .map(|&d| fare.fare(trip_duration(d, speed_mph)))
        .collect();
    let mut by_distance: Vec<BinRevenue> = (0..scheme.len())
        .map(|d| BinRevenue {
            bin: d,
            label: scheme.label(d),
            direct: vec![0.0; modes.len()],
            access: 0.0,
        })
        .collect();
    let mut unattributed = 0.0;
    for p in predictions {
        if p.breakdown.len() != modes.len() || p.access_breakdown.len() != scheme.len() {
            return Err(Error::Invalid(format!(
                "prediction for zone `{}` does not match {} modes x {} bins",
                p.zone.id,
                modes.len(),
                scheme.len()
            )));
        }
        for (m, row) in p.breakdown.iter().enumerate() {
            for (d, trips) in row.iter().enumerate() {
                by_distance[d].direct[m] += trips * direct_fare[d];
            }
        }
        if p.access_breakdown.iter().any(|&t| t != 0.0) {
            let minutes = *times.get(&p.zone).ok_or_else(|| {
                Error::ZoneMismatch(format!(
                    "zone `{}` has access trips but no access/egress times",
                    p.zone.id
                ))
            })?;
            for (d, trips) in p.access_breakdown.iter().enumerate() {
                let ride = minutes.min(trip_duration(scheme.delta(d), speed_mph));
                by_distance[d].access += trips * fare.fare(ride);
            }
        }
        unattributed += p.constant_share * fare.fare(average_duration_min);
    }
    let direct_daily: f64 = by_distance.iter().flat_map(|b| b.direct.iter()).sum();
    let access_daily: f64 = by_distance.iter().map(|b| b.access).sum();
    let total_daily = direct_daily + access_daily + unattributed;
    Ok(RevenueReport {
        modes: modes.to_vec(),
        by_distance,
        unattributed_daily: unattributed,
        direct_daily,
        access_daily,
        total_daily,
        total_annual: annualize(total_daily),
        assumptions: RevenueAssumptions {
            speed_mph,
            average_duration_min,
            fare: *fare,
        },
    })
}

/// Substituted trips over original trips; `None` where there were no trips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareRow {
    /// Mode name, or [`ACCESS_LABEL`] for transit access/egress.
    pub category: String,
    pub zone: Option<String>,
    pub bin: Option<usize>,
    pub substituted: f64,
    pub original: f64,
    pub share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstitutionShares {
    /// One row per (category, zone, bin).
    pub cells: Vec<ShareRow>,
    /// Summed over bins, per (category, zone).
    pub by_zone: Vec<ShareRow>,
    /// Summed over zones, per (category, bin).
    pub by_bin: Vec<ShareRow>,
}

impl SubstitutionShares {
    /// `mode,zone,bin,share` rows for every cell; absent shares are empty.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mode,zone,bin,share\n");
        for r in &self.cells {
            s.push_str(&format!(
                "{},{},{},{}\n",
                r.category,
                r.zone.as_deref().unwrap_or(""),
                r.bin.map_or(String::new(), |b| b.to_string()),
                r.share.map_or(String::new(), format_sig6)
            ));
        }
        s
    }

    pub fn zone_share(&self, category: &str, zone: &str) -> Option<f64> {
        self.by_zone
            .iter()
            .find(|r| r.category == category && r.zone.as_deref() == Some(zone))
            .and_then(|r| r.share)
    }
}

fn ratio(sub: f64, orig: f64) -> Option<f64> {
    (orig > 0.0).then(|| sub / orig)
}

/// Share of each mode's trips (and of transit trips' access legs) that the
/// model assigns to e-scooters.
pub fn substitution_shares(
    predictions: &[SubstitutionPrediction],
    trips: &ModalTripMatrix,
    transit_mode: &str,
) -> Result<SubstitutionShares> {
    let n_bins = trips.n_bins();
    let pt = trips.mode_index(transit_mode);
    let mut categories: Vec<(String, Option<usize>, bool)> = trips
        .modes()
        .iter()
        .enumerate()
        .map(|(m, name)| (name.clone(), Some(m), false))
        .collect();
    if pt.is_some() {
        categories.push((ACCESS_LABEL.to_string(), pt, true));
    }

    let mut cells = Vec::new();
    let mut by_zone = Vec::new();
    let mut bin_sub = vec![vec![0.0; n_bins]; categories.len()];
    let mut bin_orig = vec![vec![0.0; n_bins]; categories.len()];
    for p in predictions {
        let z = trips.zone_index(&p.zone).ok_or_else(|| {
            Error::ZoneMismatch(format!("prediction zone `{}` absent from trip matrix", p.zone.id))
        })?;
        for (c, (name, mode, is_access)) in categories.iter().enumerate() {
            let m = mode.expect("every category maps to a mode");
            let row = trips.row(m, z);
            let (mut zs, mut zo) = (0.0, 0.0);
            for d in 0..n_bins {
                let sub = if *is_access { p.access_breakdown[d] } else { p.breakdown[m][d] };
                let orig = row[d];
                zs += sub;
                zo += orig;
                bin_sub[c][d] += sub;
                bin_orig[c][d] += orig;
                cells.push(ShareRow {
                    category: name.clone(),
                    zone: Some(p.zone.id.clone()),
                    bin: Some(d),
                    substituted: sub,
                    original: orig,
                    share: ratio(sub, orig),
                });
            }
            by_zone.push(ShareRow {
                category: name.clone(),
                zone: Some(p.zone.id.clone()),
                bin: None,
                substituted: zs,
                original: zo,
                share: ratio(zs, zo),
            });
        }
    }
    let by_bin = categories
        .iter()
        .enumerate()
        .flat_map(|(c, (name, _, _))| {
            let (bs, bo) = (&bin_sub[c], &bin_orig[c]);
            (0..n_bins).map(move |d| ShareRow {
                category: name.clone(),
                zone: None,
                bin: Some(d),
                substituted: bs[d],
                original: bo[d],
                share: ratio(bs[d], bo[d]),
            })
        })
        .collect();
    Ok(SubstitutionShares {
        cells,
        by_zone,
        by_bin,
    })
}

/// GeoJSON feature collection without geometry, one feature per mapped
/// zone, carrying the zone's substitution totals and shares as properties.
pub fn zone_property_table(
    predictions: &[SubstitutionPrediction],
    shares: &SubstitutionShares,
    feature_ids: &BTreeMap<String, String>,
) -> serde_json::Value {
    let mut features = Vec::new();
    for p in predictions {
        let Some(fid) = feature_ids.get(&p.zone.id) else {
            continue;
        };
        let mut props = serde_json::Map::new();
        props.insert("zone_id".into(), p.zone.id.clone().into());
        props.insert("total".into(), p.total.into());
        props.insert("constant".into(), p.constant_share.into());
        props.insert("direct".into(), p.direct_total().into());
        props.insert("access".into(), p.access_total().into());
        for r in shares.by_zone.iter().filter(|r| r.zone.as_deref() == Some(p.zone.id.as_str())) {
            props.insert(
                format!("share_{}", r.category),
                r.share.map_or(serde_json::Value::Null, Into::into),
            );
        }
        features.push(serde_json::json!({
            "type": "Feature",
            "id": fid,
            "geometry": null,
            "properties": props,
        }));
    }
    serde_json::json!({ "type": "FeatureCollection", "features": features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{predict_substitution, BetaMode, DistanceBetas, FactorModelParams};
    use approx::assert_relative_eq;

    fn zone(i: usize) -> ZoneId {
        ZoneId::new(format!("{i}"), "taz").unwrap()
    }

    #[test]
    fn durations() {
        assert_eq!(trip_duration(2.0, 10.0), 12.0);
        assert_eq!(trip_duration(0.0, 10.0), 0.0);
        assert!((trip_duration(1.667, 10.0) - 10.0).abs() < 0.01);
    }

    #[test]
    fn market_revenue_values() {
        let fare = FareSchedule::default();
        let r = market_revenue(66_000.0, 12.0, &fare);
        assert_relative_eq!(r.daily, 184_800.0, epsilon = 1e-6);
        assert_relative_eq!(r.annual, 67_452_000.0, epsilon = 1e-4);
        assert_eq!(market_revenue(0.0, 12.0, &fare).daily, 0.0);
        assert_eq!(market_revenue(1.0, 0.0, &fare).daily, 1.0);
        assert_eq!(annualize(2181.0), 796_065.0);
    }

    #[test]
    fn negative_fare_rejected() {
        assert!(FareSchedule::new(-1.0, 0.1).is_err());
    }

    fn taxi_prediction(trips: f64) -> SubstitutionPrediction {
        SubstitutionPrediction {
            zone: zone(1),
            total: trips,
            breakdown: vec![vec![trips]],
            access_breakdown: vec![0.0],
            constant_share: 0.0,
            access_fraction: 0.0,
        }
    }

    #[test]
    fn direct_revenue_single_bin() {
        let scheme = DistanceBinScheme::one_mile_bins(1);
        let r = substitution_revenue(
            &[taxi_prediction(1000.0)],
            &["taxi".to_string()],
            &scheme,
            &[],
            &FareSchedule::default(),
            10.0,
            12.0,
        )
        .unwrap();
        assert_relative_eq!(r.by_distance[0].direct[0], 1450.0, epsilon = 1e-9);
        assert_relative_eq!(r.total_daily, 1450.0, epsilon = 1e-9);
        assert_relative_eq!(r.total_annual, 365.0 * 1450.0, epsilon = 1e-6);
    }

    #[test]
    fn only_constant_share_is_unattributed() {
        let scheme = DistanceBinScheme::one_mile_bins(1);
        let mut p = taxi_prediction(0.0);
        p.constant_share = 10.0;
        p.total = 10.0;
        let r = substitution_revenue(&[p], &["taxi".to_string()], &scheme, &[], &FareSchedule::default(), 10.0, 12.0)
            .unwrap();
        assert_eq!(r.direct_daily, 0.0);
        assert_eq!(r.access_daily, 0.0);
        assert_relative_eq!(r.unattributed_daily, 28.0, epsilon = 1e-12);
        assert_eq!(r.total_daily, r.unattributed_daily);
    }

    #[test]
    fn access_revenue_uses_access_time_capped_by_bin_duration() {
        let scheme = DistanceBinScheme::one_mile_bins(3);
        let p = SubstitutionPrediction {
            zone: zone(1),
            total: 30.0,
            breakdown: vec![vec![0.0; 3]],
            access_breakdown: vec![10.0, 10.0, 10.0],
            constant_share: 0.0,
            access_fraction: 0.001,
        };
        // 0.1 h access + egress = 6 minutes; bin 0 direct duration is 3 minutes
        let access = [TransitAccessProfile::new(zone(1), 0.05, 0.05).unwrap()];
        let r = substitution_revenue(std::slice::from_ref(&p), &["transit".to_string()], &scheme, &access, &FareSchedule::default(), 10.0, 12.0)
            .unwrap();
        assert_relative_eq!(r.by_distance[0].access, 10.0 * (1.0 + 0.15 * 3.0), epsilon = 1e-9);
        assert_relative_eq!(r.by_distance[1].access, 10.0 * (1.0 + 0.15 * 6.0), epsilon = 1e-9);
        assert_relative_eq!(r.by_distance[2].access, 10.0 * (1.0 + 0.15 * 6.0), epsilon = 1e-9);
        assert!(substitution_revenue(&[p], &["transit".to_string()], &scheme, &[], &FareSchedule::default(), 10.0, 12.0).is_err());
    }

    fn reference_params(modes: &[String]) -> FactorModelParams {
        let mut p = FactorModelParams::zeros(modes, BetaMode::Shared, 14);
        p.constant = 203.618;
        p.set_fraction("taxi", 0.049);
        p.distance_betas = DistanceBetas::Shared(0.104);
        p.access_coeffs = [0.0, 0.0, 0.004];
        p
    }

    #[test]
    fn shares_match_closed_form() {
        let modes = vec!["transit".to_string(), "taxi".to_string()];
        let scheme = DistanceBinScheme::default();
        let mut trips = ModalTripMatrix::zeros(modes.clone(), vec![zone(1), zone(2)], scheme.clone());
        for z in 0..2 {
            for d in 0..14 {
                trips.set(0, z, d, 5000.0 / (d + 1) as f64);
                trips.set(1, z, d, if d == 5 && z == 1 { 0.0 } else { 800.0 / (d + 1) as f64 });
            }
        }
        let access: Vec<_> = (1..=2).map(|i| TransitAccessProfile::new(zone(i), 0.0, 0.081).unwrap()).collect();
        let params = reference_params(&modes);
        let preds = predict_substitution(&params, &trips, &access, "transit").unwrap();
        let shares = substitution_shares(&preds, &trips, "transit").unwrap();
        let taxi0 = shares
            .cells
            .iter()
            .find(|r| r.category == "taxi" && r.bin == Some(0))
            .unwrap();
        assert_relative_eq!(taxi0.share.unwrap(), 0.049 * 0.208, epsilon = 1e-12);
        let missing = shares
            .cells
            .iter()
            .find(|r| r.category == "taxi" && r.bin == Some(5) && r.zone.as_deref() == Some("2"))
            .unwrap();
        assert_eq!(missing.share, None);
        let fprime = 0.004 * 0.081;
        for r in shares.by_bin.iter().filter(|r| r.category == ACCESS_LABEL) {
            let d = r.bin.unwrap();
            let expected = (1.0 - (0.104 / scheme.delta(d)).min(1.0)) * fprime;
            assert_relative_eq!(r.share.unwrap(), expected, epsilon = 1e-12);
            assert!(r.share.unwrap() <= 0.000324 + 1e-15);
        }
        let csv = shares.to_csv();
        assert!(csv.starts_with("mode,zone,bin,share\n"));
        assert!(csv.contains("taxi,1,0,0.010192\n"));
    }

    #[test]
    fn zero_params_give_zero_shares() {
        let modes = vec!["taxi".to_string()];
        let mut trips = ModalTripMatrix::zeros(modes.clone(), vec![zone(1)], DistanceBinScheme::default());
        trips.set(0, 0, 0, 10.0);
        let params = FactorModelParams::zeros(&modes, BetaMode::Shared, 14);
        let preds = predict_substitution(&params, &trips, &[], "transit").unwrap();
        let shares = substitution_shares(&preds, &trips, "transit").unwrap();
        assert!(shares.cells.iter().all(|r| r.share.unwrap_or(0.0) == 0.0));
    }

    #[test]
    fn property_table_lists_mapped_zones_only() {
        let preds = vec![taxi_prediction(5.0)];
        let modes = vec!["taxi".to_string()];
        let mut trips = ModalTripMatrix::zeros(modes, vec![zone(1)], DistanceBinScheme::one_mile_bins(1));
        trips.set(0, 0, 0, 50.0);
        let shares = substitution_shares(&preds, &trips, "transit").unwrap();
        let map = BTreeMap::from([("1".to_string(), "f-001".to_string())]);
        let v = zone_property_table(&preds, &shares, &map);
        assert_eq!(v["features"][0]["id"], "f-001");
        assert_eq!(v["features"][0]["properties"]["share_taxi"], 0.1);
        let none = zone_property_table(&preds, &shares, &BTreeMap::new());
        assert_eq!(none["features"].as_array().unwrap().len(), 0);
    }
}
