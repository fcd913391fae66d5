//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines are always printed.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use common::{fd_gradient, normal_equations, random_regression, zone};
use modesub_core::analysis::{annualize, market_revenue, FareSchedule};
use modesub_core::demand::{elasticity_effect, fit_ols, FitDiagnostics};
use modesub_core::factor::{
    access_fraction, bootstrap, competition_share, fit, BetaMode, BootstrapConfig, DistanceBetas, FactorConfig,
    FactorData, FactorModelParams, FactorObjective,
};
use modesub_core::ingest::{crosswalk_transfer, AttributeKind, CrosswalkEntry};
use modesub_core::solver::BoundedProblem;
use modesub_core::synth::{generate, ScenarioConfig};
use modesub_core::{DistanceBinScheme, TransitAccessProfile, ZoneId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(name: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    ensure((got - want).abs() <= tol, format!("{name} = {got}, expected {want} +/- {tol}"))
}

fn diagnostics_identity() -> Result<String, String> {
    let d = FitDiagnostics::from_sums(28, 4, 123.21, 49.643).map_err(|e| e.to_string())?;
    within("R2", d.r_squared, 0.713, 1e-3)?;
    within("adjusted R2", d.adj_r_squared, 0.663, 1e-3)?;
    // reported to two decimals
    within("F", (d.f_statistic * 100.0).round() / 100.0, 14.27, 1e-3)?;
    Ok(format!("R2 {:.4}, adj {:.4}, F {:.3}", d.r_squared, d.adj_r_squared, d.f_statistic))
}

fn elasticity() -> Result<String, String> {
    let f = elasticity_effect(-5.564, 0.01);
    within("factor", f, 0.9461, 1e-4)?;
    Ok(format!("factor {f:.6}"))
}

fn reference_params() -> FactorModelParams {
    let modes = vec!["transit".to_string(), "taxi".to_string()];
    let mut p = FactorModelParams::zeros(&modes, BetaMode::Shared, 14);
    p.constant = 203.618;
    p.set_fraction("taxi", 0.049);
    p.distance_betas = DistanceBetas::Shared(0.104);
    p.access_coeffs = [0.0, 0.0, 0.004];
    p
}

fn distance_decay() -> Result<String, String> {
    let scheme = DistanceBinScheme::default();
    let p = reference_params();
    let short = competition_share(&p, 0, &scheme);
    let long = competition_share(&p, 2, &scheme);
    within("P(0.5)", short, 0.2080, 1e-6)?;
    within("P(2.5)", long, 0.0416, 1e-6)?;
    Ok(format!("P(0.5) {short:.6}, P(2.5) {long:.6}"))
}

fn taxi_share() -> Result<String, String> {
    let p = reference_params();
    let share = p.fraction("taxi").unwrap() * competition_share(&p, 0, &DistanceBinScheme::default());
    within("share", share, 0.010192, 1e-12)?;
    Ok(format!("share {share}"))
}

fn access_share() -> Result<String, String> {
    let profile = TransitAccessProfile::new(zone(1), 0.0, 0.081).map_err(|e| e.to_string())?;
    let f = access_fraction(&reference_params(), &profile);
    within("F'", f, 0.000324, 1e-12)?;
    Ok(format!("F' {f}"))
}

fn revenue_arithmetic() -> Result<String, String> {
    let r = market_revenue(66_000.0, 12.0, &FareSchedule::default());
    within("daily", r.daily, 184_800.0, 1e-6)?;
    within("annual", r.annual, 67_452_000.0, 1e-4)?;
    within("taxi annual", annualize(2181.0), 796_065.0, 0.0)?;
    within("access annual", annualize(758.0), 276_670.0, 0.0)?;
    Ok(format!("${}/day, ${}/yr", r.daily, r.annual))
}

fn ols_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_coef: f64 = 0.0;
    let mut worst_orth: f64 = 0.0;
    for _ in 0..100 {
        let k = rng.random_range(1..=5);
        let n = rng.random_range(k + 3..=50);
        let reg = random_regression(&mut rng, n, k);
        let model = fit_ols(&reg.profiles, &reg.observed, &reg.spec).map_err(|e| e.to_string())?;
        let oracle = normal_equations(&reg.design, &reg.response);
        for (c, o) in model.coefficients.iter().zip(&oracle) {
            worst_coef = worst_coef.max((c.estimate - o).abs() / o.abs().max(1.0));
        }
        ensure(
            model.zones.iter().zip(&reg.profiles).all(|(z, p)| *z == p.zone),
            "residual order differs from input order",
        )?;
        let xnorm: f64 = reg.design.iter().flatten().map(|v| v * v).sum::<f64>().sqrt();
        let ynorm: f64 = reg.response.iter().map(|v| v * v).sum::<f64>().sqrt();
        for j in 0..=k {
            let xr: f64 = reg.design.iter().zip(&model.residuals).map(|(row, r)| row[j] * r).sum();
            worst_orth = worst_orth.max(xr.abs() / (xnorm * ynorm).max(1.0));
        }
    }
    ensure(worst_coef <= 1e-9, format!("coefficient gap {worst_coef:e}"))?;
    ensure(worst_orth <= 1e-8, format!("|X'r| {worst_orth:e}"))?;
    Ok(format!("max rel gap {worst_coef:.1e}, max scaled |X'r| {worst_orth:.1e}"))
}

fn noiseless_recovery() -> Result<String, String> {
    let cfg = ScenarioConfig::standard(11);
    let s = generate(&cfg).map_err(|e| e.to_string())?;
    let data = FactorData::new(&s.forecasts, &s.trips, &s.access, "transit").map_err(|e| e.to_string())?;
    let f = fit(&data, &FactorConfig::default()).map_err(|e| e.to_string())?;
    ensure(f.objective < 1e-6, format!("objective {:e}", f.objective))?;
    let planted = cfg.planted_factor_params.to_vector();
    let names = cfg.planted_factor_params.names();
    let mut worst: f64 = 0.0;
    for ((name, est), truth) in names.iter().zip(f.params.to_vector()).zip(&planted) {
        let err = if *truth != 0.0 {
            (est - truth).abs() / truth.abs()
        } else {
            (est - truth).abs()
        };
        ensure(
            err <= if *truth != 0.0 { 1e-3 } else { 1e-6 },
            format!("{name}: estimate {est}, planted {truth}"),
        )?;
        worst = worst.max(err);
    }
    Ok(format!("objective {:.1e}, worst error {worst:.1e}", f.objective))
}

fn gradient_check() -> Result<String, String> {
    let s = generate(&ScenarioConfig::standard(5)).map_err(|e| e.to_string())?;
    let data = FactorData::new(&s.forecasts, &s.trips, &s.access, "transit").map_err(|e| e.to_string())?;
    let obj = FactorObjective::new(&data, BetaMode::Shared);
    let scheme = s.trips.scheme();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    while points < 20 {
        let mut p = obj.template().clone();
        p.constant = rng.random_range(0.0..300.0);
        for f in p.mode_fractions.iter_mut() {
            *f = rng.random_range(0.0..0.2);
        }
        let beta = rng.random_range(0.05..4.0);
        p.distance_betas = DistanceBetas::Shared(beta);
        p.access_coeffs = [rng.random_range(0.001..0.01), rng.random_range(0.0..0.02), rng.random_range(0.0..0.02)];
        if scheme.deltas().iter().any(|d| (beta / d - 1.0).abs() < 1e-4) {
            continue;
        }
        let x = p.to_vector();
        let (_, g) = obj.value_grad(&x);
        let fd = fd_gradient(|v| obj.value(v), &x);
        let norm = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
        points += 1;
    }
    ensure(worst < 1e-5, format!("relative gradient error {worst:e}"))?;
    Ok(format!("20 points, worst relative error {worst:.1e}"))
}

fn bootstrap_determinism_and_coverage() -> Result<String, String> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let base = ScenarioConfig::taxi_transit(900, 3.0);
    let s = generate(&base).map_err(|e| e.to_string())?;
    let data = FactorData::new(&s.forecasts, &s.trips, &s.access, "transit").map_err(|e| e.to_string())?;
    let fc = FactorConfig { seed: 7, ..FactorConfig::default() };
    let fitted = fit(&data, &fc).map_err(|e| e.to_string())?;
    let run = |w: usize| {
        bootstrap(&fitted, &data, &fc, &BootstrapConfig { replicates: 40, seed: 7, ci_level: 0.9, workers: w })
            .map(|r| r.0)
            .map_err(|e| e.to_string())
    };
    let (a, b, c) = (run(1)?, run(1)?, run(workers.max(2))?);
    let bits = |s: &modesub_core::factor::BootstrapSummary| -> Vec<u64> {
        s.samples.iter().flatten().map(|v| v.to_bits()).collect()
    };
    ensure(bits(&a) == bits(&b) && bits(&a) == bits(&c), "B=40 replicates differ between runs")?;

    let watched = ["C", "F_taxi", "beta_d", "beta_2"];
    let names = base.planted_factor_params.names();
    let planted = base.planted_factor_params.to_vector();
    let mut hits = [0usize; 4];
    let trials = 50;
    for t in 0..trials {
        let cfg = ScenarioConfig::taxi_transit(1000 + t, 3.0);
        let s = generate(&cfg).map_err(|e| e.to_string())?;
        let data = FactorData::new(&s.forecasts, &s.trips, &s.access, "transit").map_err(|e| e.to_string())?;
        let fc = FactorConfig { seed: t, ..FactorConfig::default() };
        let fitted = fit(&data, &fc).map_err(|e| e.to_string())?;
        let (summary, _) = bootstrap(&fitted, &data, &fc, &BootstrapConfig { replicates: 200, seed: t, ci_level: 0.9, workers })
            .map_err(|e| e.to_string())?;
        for (h, name) in hits.iter_mut().zip(watched) {
            let j = names.iter().position(|n| n == name).unwrap();
            let ci = &summary.parameters[j];
            if ci.lower <= planted[j] && planted[j] <= ci.upper {
                *h += 1;
            }
        }
    }
    let rates: Vec<f64> = hits.iter().map(|&h| h as f64 / trials as f64).collect();
    let report = watched
        .iter()
        .zip(&rates)
        .map(|(n, r)| format!("{n} {:.0}%", 100.0 * r))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(rates.iter().all(|r| (0.80..=0.98).contains(r)), format!("coverage out of [80%, 98%]: {report}"))?;
    Ok(format!("bit-identical B=40; 90% CI coverage over {trials} trials: {report}"))
}

fn crosswalk_conservation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n_src = rng.random_range(1..40);
        let n_tgt = rng.random_range(1..60);
        let mut cw = Vec::new();
        let mut values = BTreeMap::new();
        for i in 0..n_src {
            let k = rng.random_range(1..=10usize.min(n_tgt));
            let mut targets: Vec<usize> = (0..n_tgt).collect();
            for j in 0..k {
                let r = rng.random_range(j..n_tgt);
                targets.swap(j, r);
            }
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.001..1.0)).collect();
            let total: f64 = raw.iter().sum();
            for (t, w) in targets[..k].iter().zip(&raw) {
                cw.push(CrosswalkEntry {
                    source_zone: zone(i),
                    target_zone: ZoneId::new(format!("T{t}"), "target").unwrap(),
                    weight: w / total,
                });
            }
            values.insert(zone(i), rng.random_range(0.0..1e6));
        }
        let t = crosswalk_transfer(&values, &AttributeKind::infer("trips"), &cw, None).map_err(|e| e.to_string())?;
        let before: f64 = values.values().sum();
        let after: f64 = t.values.values().sum();
        worst = worst.max((before - after).abs() / before.max(f64::MIN_POSITIVE));
    }
    ensure(worst <= 1e-9, format!("relative total drift {worst:e}"))?;
    Ok(format!("200 crosswalks, worst relative drift {worst:.1e}"))
}

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("diagnostics identity", diagnostics_identity),
        ("elasticity", elasticity),
        ("distance decay", distance_decay),
        ("taxi share", taxi_share),
        ("access fraction", access_share),
        ("revenue arithmetic", revenue_arithmetic),
        ("OLS oracle equivalence", ols_oracle),
        ("noiseless parameter recovery", noiseless_recovery),
        ("gradient check", gradient_check),
        ("bootstrap determinism and coverage", bootstrap_determinism_and_coverage),
        ("crosswalk conservation", crosswalk_conservation),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
