mod common;

use std::collections::BTreeMap;

use approx::assert_relative_eq;
use common::{normal_equations, profile, random_regression, spec_of, zone};
use modesub_core::demand::{backward_select, fit_ols, predict, screen_collinearity};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn coefficients_match_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let k = rng.random_range(1..=5);
        let n = rng.random_range(k + 3..=50);
        let reg = random_regression(&mut rng, n, k);
        let model = fit_ols(&reg.profiles, &reg.observed, &reg.spec).unwrap();
        let oracle = normal_equations(&reg.design, &reg.response);
        for (c, o) in model.coefficients.iter().zip(&oracle) {
            assert_relative_eq!(c.estimate, *o, max_relative = 1e-9, epsilon = 1e-10);
        }
    }
}

#[test]
fn t_value_is_estimate_over_std_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let reg = random_regression(&mut rng, 30, 3);
    let model = fit_ols(&reg.profiles, &reg.observed, &reg.spec).unwrap();
    for c in &model.coefficients {
        assert_eq!(c.t_value, c.estimate / c.std_error);
        assert!((0.0..=1.0).contains(&c.p_value));
    }
    let d = &model.diagnostics;
    assert_relative_eq!(d.r_squared, d.ssr / (d.ssr + d.sse), max_relative = 1e-14);
}

#[test]
fn pure_noise_predictor_is_removed_first() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut profiles = Vec::new();
    let mut observed = BTreeMap::new();
    for i in 0..40 {
        let a: f64 = rng.random_range(1.0..20.0);
        let b: f64 = rng.random_range(1.0..20.0);
        let noise: f64 = rng.random_range(1.0..20.0);
        let p = profile(i, &[("a", a), ("b", b), ("noise", noise)]);
        let y = 1.0 + 2.0 * a.ln() - 1.5 * b.ln() + rng.random_range(-0.05..0.05);
        observed.insert(p.zone.clone(), f64::exp(y));
        profiles.push(p);
    }
    let sel = backward_select(&profiles, &observed, &spec_of(&["a", "noise", "b"]), 0.05).unwrap();
    assert_eq!(sel.removed.len(), 1);
    assert_eq!(sel.removed[0].predictor, "noise");
    let kept: Vec<&str> = sel.model.coefficients.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(kept, ["const", "a", "b"]);
}

#[test]
fn independent_columns_raise_no_collinearity_flags() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let profiles: Vec<_> = (0..500)
        .map(|i| {
            profile(
                i,
                &[
                    ("u", rng.random_range(1.0..2.0)),
                    ("v", rng.random_range(1.0..2.0)),
                    ("w", rng.random_range(1.0..2.0)),
                ],
            )
        })
        .collect();
    let report = screen_collinearity(&profiles, &spec_of(&["u", "v", "w"]), 0.7).unwrap();
    assert!(report.pairs.is_empty());
    let all = screen_collinearity(&profiles, &spec_of(&["u", "v", "w"]), 0.0).unwrap();
    assert_eq!(all.pairs.len(), 3);
    assert!(all.pairs.iter().all(|p| p.r.abs() < 0.2));
}

#[test]
fn forecast_total_ignores_zone_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let reg = random_regression(&mut rng, 25, 2);
    let model = fit_ols(&reg.profiles, &reg.observed, &reg.spec).unwrap();
    let forward: f64 = predict(&model, &reg.profiles).unwrap().iter().map(|f| f.trips).sum();
    let mut reversed = reg.profiles.clone();
    reversed.reverse();
    let backward: f64 = predict(&model, &reversed).unwrap().iter().map(|f| f.trips).sum();
    assert_relative_eq!(forward, backward, max_relative = 1e-12);
}

#[test]
fn predictions_reproduce_fitted_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let reg = random_regression(&mut rng, 20, 2);
    let model = fit_ols(&reg.profiles, &reg.observed, &reg.spec).unwrap();
    let preds = predict(&model, &reg.profiles).unwrap();
    for (f, r) in preds.iter().zip(&model.residuals) {
        let obs = reg.observed[&f.zone].ln();
        assert_relative_eq!(f.trips.ln(), obs - r, epsilon = 1e-9);
    }
    assert_eq!(preds[0].zone, zone(0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rescaling_a_predictor_moves_only_the_intercept(seed in 0u64..1000, c in 0.01f64..100.0, j in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reg = random_regression(&mut rng, 30, 3);
        let base = fit_ols(&reg.profiles, &reg.observed, &reg.spec).unwrap();
        let name = format!("x{j}");
        let scaled: Vec<_> = reg
            .profiles
            .iter()
            .map(|p| {
                let mut q = p.clone();
                *q.extra.get_mut(&name).unwrap() *= c;
                q
            })
            .collect();
        let moved = fit_ols(&scaled, &reg.observed, &reg.spec).unwrap();
        let b = base.coefficients[j + 1].estimate;
        prop_assert!((moved.intercept() - (base.intercept() - b * c.ln())).abs() < 1e-8 * (1.0 + base.intercept().abs()));
        for (x, y) in base.coefficients[1..].iter().zip(&moved.coefficients[1..]) {
            prop_assert!((x.estimate - y.estimate).abs() <= 1e-8 * (1.0 + x.estimate.abs()));
        }
        prop_assert!((base.diagnostics.r_squared - moved.diagnostics.r_squared).abs() < 1e-10);
        let p0 = predict(&base, &reg.profiles).unwrap();
        let p1 = predict(&moved, &scaled).unwrap();
        for (a, b) in p0.iter().zip(&p1) {
            prop_assert!((a.trips - b.trips).abs() <= 1e-7 * a.trips);
        }
    }
}
