mod common;

use common::zone;
use modesub_core::analysis::{market_revenue, substitution_revenue, substitution_shares, FareSchedule};
use modesub_core::factor::{competition_share, predict_substitution, DistanceBetas, FactorModelParams};
use modesub_core::{DistanceBinScheme, ModalTripMatrix, TransitAccessProfile};
use proptest::prelude::*;

fn modes() -> Vec<String> {
    vec!["transit".into(), "taxi".into(), "walk".into()]
}

fn setup(counts: &[f64], zones: &[usize]) -> (ModalTripMatrix, Vec<TransitAccessProfile>) {
    let ids: Vec<_> = zones.iter().map(|&i| zone(i)).collect();
    let m = ModalTripMatrix::from_counts(modes(), ids.clone(), DistanceBinScheme::one_mile_bins(4), counts.to_vec()).unwrap();
    let access = ids
        .iter()
        .enumerate()
        .map(|(i, z)| TransitAccessProfile::new(z.clone(), 0.05 + 0.05 * i as f64, 0.1).unwrap())
        .collect();
    (m, access)
}

fn params() -> impl Strategy<Value = FactorModelParams> {
    (0.0f64..300.0, prop::collection::vec(0.0f64..1.0, 3), 0.0f64..5.0, prop::collection::vec(0.0f64..0.5, 3)).prop_map(
        |(c, f, b, a)| FactorModelParams {
            constant: c,
            modes: modes(),
            mode_fractions: f,
            distance_betas: DistanceBetas::Shared(b),
            access_coeffs: [a[0], a[1], a[2]],
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn direct_shares_are_fraction_times_competition(p in params(), counts in prop::collection::vec(0.0f64..1e3, 24)) {
        let (m, access) = setup(&counts, &[1, 2]);
        let preds = predict_substitution(&p, &m, &access, "transit").unwrap();
        let shares = substitution_shares(&preds, &m, "transit").unwrap();
        for r in &shares.cells {
            let Some(share) = r.share else {
                prop_assert_eq!(r.original, 0.0);
                continue;
            };
            prop_assert!((0.0..=1.0 + 1e-12).contains(&share));
            if let Some(mi) = modes().iter().position(|x| *x == r.category) {
                let d = r.bin.unwrap();
                let expect = p.mode_fractions[mi] * competition_share(&p, d, m.scheme());
                prop_assert!((share - expect).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn revenue_is_monotone(p in params(), counts in prop::collection::vec(0.0f64..1e3, 24), base in 0.0f64..3.0, rate in 0.0f64..0.5, speed in 3.0f64..20.0) {
        let (m, access) = setup(&counts, &[1, 2]);
        let preds = predict_substitution(&p, &m, &access, "transit").unwrap();
        let fare = FareSchedule::new(base, rate).unwrap();
        let r = |fare: &FareSchedule, speed: f64, preds: &[_]| substitution_revenue(preds, &modes(), m.scheme(), &access, fare, speed, 12.0).unwrap().total_daily;
        let r0 = r(&fare, speed, &preds);
        prop_assert!(r(&FareSchedule::new(base + 0.5, rate).unwrap(), speed, &preds) >= r0);
        prop_assert!(r(&FareSchedule::new(base, rate + 0.05).unwrap(), speed, &preds) >= r0);
        // slower riding means longer rides
        prop_assert!(r(&fare, speed * 0.5, &preds) >= r0 - 1e-9 * r0);
        let doubled: Vec<f64> = counts.iter().map(|c| 2.0 * c).collect();
        let (m2, _) = setup(&doubled, &[1, 2]);
        let preds2 = predict_substitution(&p, &m2, &access, "transit").unwrap();
        prop_assert!(r(&fare, speed, &preds2) >= r0);
    }

    #[test]
    fn revenue_total_ignores_zone_order(p in params(), counts in prop::collection::vec(0.0f64..1e3, 24)) {
        let (m, access) = setup(&counts, &[1, 2]);
        let preds = predict_substitution(&p, &m, &access, "transit").unwrap();
        let mut rev = preds.clone();
        rev.reverse();
        let fare = FareSchedule::default();
        let a = substitution_revenue(&preds, &modes(), m.scheme(), &access, &fare, 10.0, 12.0).unwrap();
        let b = substitution_revenue(&rev, &modes(), m.scheme(), &access, &fare, 10.0, 12.0).unwrap();
        prop_assert!((a.total_daily - b.total_daily).abs() <= 1e-9 * a.total_daily.max(1.0));
        prop_assert!((a.total_annual - 365.0 * a.total_daily).abs() <= 1e-9 * a.total_annual.max(1.0));
    }

    #[test]
    fn market_revenue_scales_with_trips(trips in 0.0f64..1e6, minutes in 0.0f64..60.0) {
        let fare = FareSchedule::default();
        let one = market_revenue(1.0, minutes, &fare).daily;
        prop_assert!((market_revenue(trips, minutes, &fare).daily - trips * one).abs() <= 1e-9 * (trips * one).max(1.0));
    }
}
