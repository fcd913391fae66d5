mod common;

use std::collections::BTreeMap;
use std::fs;

use common::zone;
use modesub_core::ingest::{
    crosswalk_transfer, load_forecasts, load_trip_matrix, load_zone_profiles, write_trip_matrix, AttributeClass,
    AttributeKind, CrosswalkEntry, ProfileSchema, TripLoadOptions,
};
use modesub_core::synth::{generate, ScenarioConfig};
use modesub_core::{DistanceBinScheme, Error, ZoneId};
use proptest::prelude::*;

#[test]
fn profile_columns_may_come_in_any_order() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    fs::write(
        &path,
        "unemployment_rate,median_income,zone_id,labor_rate,extra_col,health_insurance_rate,area_sqmi,age_ratio_20_40,population,median_age\n\
         4.5, 61000, 10001, 70, 3.5, 93, 0.5, 0.41, 12000, 33\n\
         6.0, 45000, 10002, 62, 1.5, 88, 0.25, 0.30, 9000, 38\n",
    )
    .unwrap();
    let ps = load_zone_profiles(&path, &ProfileSchema::default(), "zip").unwrap();
    assert_eq!(ps.len(), 2);
    assert_eq!(ps[0].zone, ZoneId::new("10001", "zip").unwrap());
    assert_eq!(ps[0].median_income, 61000.0);
    assert_eq!(ps[1].density, 36000.0);
    assert_eq!(ps[0].extra["extra_col"], 3.5);
}

#[test]
fn every_bad_profile_row_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    fs::write(
        &path,
        "zone_id,population,area_sqmi,median_age,age_ratio_20_40,labor_rate,median_income,health_insurance_rate,unemployment_rate\n\
         a,100,1,30,0.3,60,0,90,5\n\
         b,100,1,30,0.3,60,50000,90,5\n\
         c,100,1,30,0.3,oops,50000,90,5\n",
    )
    .unwrap();
    match load_zone_profiles(&path, &ProfileSchema::default(), "taz") {
        Err(Error::InvalidRows { rows, .. }) => {
            assert_eq!(rows.len(), 2);
            assert_eq!(rows[0].line, 2);
            assert!(rows[0].message.contains("nonpositive field: median_income"));
            assert_eq!(rows[1].line, 4);
        }
        other => panic!("expected row errors, got {other:?}"),
    }
}

#[test]
fn trip_matrix_survives_a_file_round_trip() {
    let s = generate(&ScenarioConfig::standard(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    write_trip_matrix(&path, &s.trips).unwrap();
    let back = load_trip_matrix(&path, s.trips.scheme(), &TripLoadOptions::default()).unwrap();
    assert_eq!(back, s.trips);
}

#[test]
fn trip_rows_by_distance_are_binned_and_summed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    fs::write(
        &path,
        "zone_id,trips,mode,distance_mi\n1,5,taxi,0.2\n1,2,taxi,0.9\n2,1,taxi,13.99\n1,3,transit,1.0\n",
    )
    .unwrap();
    let m = load_trip_matrix(&path, &DistanceBinScheme::default(), &TripLoadOptions::default()).unwrap();
    assert_eq!(m.modes(), ["transit", "taxi"]);
    assert_eq!(m.get(1, 0, 0), 7.0);
    assert_eq!(m.get(1, 1, 13), 1.0);
    assert_eq!(m.get(0, 0, 1), 3.0);

    fs::write(&path, "zone_id,trips,mode,distance_mi\n1,5,hovercraft,0.2\n").unwrap();
    assert!(matches!(
        load_trip_matrix(&path, &DistanceBinScheme::default(), &TripLoadOptions::default()),
        Err(Error::UnknownMode(m)) if m == "hovercraft"
    ));

    fs::write(&path, "zone_id,trips,mode,distance_mi\n1,5,taxi,14.0\n1,-1,taxi,1\n").unwrap();
    match load_trip_matrix(&path, &DistanceBinScheme::default(), &TripLoadOptions::default()) {
        Err(Error::InvalidRows { rows, .. }) => {
            assert_eq!(rows.len(), 2);
            assert!(rows[0].message.contains("distance out of scheme"));
        }
        other => panic!("expected row errors, got {other:?}"),
    }
}

#[test]
fn forecasts_reject_negative_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.csv");
    fs::write(&path, "zone_id,trips\n1,5\n2,-3\n").unwrap();
    assert!(matches!(load_forecasts(&path, "taz"), Err(Error::InvalidRows { .. })));
}

/// Source zone `i` splits into `splits[i]` target pieces with random weights
/// summing to 1. Targets are shared between sources.
fn crosswalk_strategy() -> impl Strategy<Value = (Vec<CrosswalkEntry>, BTreeMap<ZoneId, f64>, BTreeMap<ZoneId, f64>)> {
    prop::collection::vec(
        (1usize..=10, prop::collection::vec(0.01f64..1.0, 10), prop::collection::vec(0usize..15, 10), 0.0f64..1e5, 0.0f64..1e4),
        1..30,
    )
    .prop_map(|sources| {
        let mut entries = Vec::new();
        let mut values = BTreeMap::new();
        let mut pop = BTreeMap::new();
        for (i, (k, raw, targets, v, p)) in sources.into_iter().enumerate() {
            let src = zone(i);
            let total: f64 = raw[..k].iter().sum();
            let mut used = std::collections::BTreeSet::new();
            for (w, t) in raw[..k].iter().zip(&targets[..k]) {
                // merge duplicate targets into distinct pieces
                let t = (*t..*t + 15).find(|c| used.insert(*c)).unwrap();
                entries.push(CrosswalkEntry {
                    source_zone: src.clone(),
                    target_zone: ZoneId::new(format!("T{t}"), "target").unwrap(),
                    weight: w / total,
                });
            }
            values.insert(src.clone(), v);
            pop.insert(src, p);
        }
        (entries, values, pop)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn extensive_totals_are_conserved((cw, values, _) in crosswalk_strategy()) {
        let t = crosswalk_transfer(&values, &AttributeKind::infer("trips"), &cw, None).unwrap();
        let before: f64 = values.values().sum();
        let after: f64 = t.values.values().sum();
        prop_assert!((before - after).abs() <= 1e-9 * before.max(1.0));
        prop_assert!(t.warnings.is_empty());
    }

    #[test]
    fn extensive_transfer_is_linear((cw, a, b) in crosswalk_strategy(), s in -3.0f64..3.0) {
        let kind = AttributeKind { name: "x".into(), class: AttributeClass::Extensive };
        let combo: BTreeMap<ZoneId, f64> = a.iter().map(|(z, v)| (z.clone(), v + s * b[z])).collect();
        let ta = crosswalk_transfer(&a, &kind, &cw, None).unwrap().values;
        let tb = crosswalk_transfer(&b, &kind, &cw, None).unwrap().values;
        let tc = crosswalk_transfer(&combo, &kind, &cw, None).unwrap().values;
        for (z, v) in &tc {
            let expect = ta[z] + s * tb[z];
            prop_assert!((v - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn intensive_values_stay_within_source_range((cw, values, pop) in crosswalk_strategy()) {
        let t = crosswalk_transfer(&values, &AttributeKind::infer("median_income"), &cw, Some(&pop)).unwrap();
        let lo = values.values().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.values().cloned().fold(f64::NEG_INFINITY, f64::max);
        for v in t.values.values() {
            prop_assert!(*v >= lo - 1e-9 * hi.abs() && *v <= hi + 1e-9 * hi.abs());
        }
    }
}

#[test]
fn unnormalized_weights_warn_and_renormalize() {
    let cw = vec![
        CrosswalkEntry { source_zone: zone(1), target_zone: zone(10), weight: 0.3 },
        CrosswalkEntry { source_zone: zone(1), target_zone: zone(11), weight: 0.3 },
    ];
    let values = BTreeMap::from([(zone(1), 100.0)]);
    let t = crosswalk_transfer(&values, &AttributeKind::infer("trips"), &cw, None).unwrap();
    assert_eq!(t.warnings.len(), 1);
    assert!((t.values[&zone(10)] - 50.0).abs() < 1e-12);
    let missing = BTreeMap::from([(zone(2), 1.0)]);
    assert!(matches!(
        crosswalk_transfer(&missing, &AttributeKind::infer("trips"), &cw, None),
        Err(Error::UnmappedZones(z)) if z == ["2"]
    ));
}
