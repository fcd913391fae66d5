//! Helpers shared by the integration tests, including oracles that are
//! deliberately independent of the library's own numerics.
#![allow(dead_code)]

use std::collections::BTreeMap;

use modesub_core::demand::{DemandModelSpec, Predictor};
use modesub_core::{ZoneId, ZoneProfile};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn zone(i: usize) -> ZoneId {
    ZoneId::new(format!("{i}"), "taz").unwrap()
}

/// A valid profile whose `extra` map carries the given columns.
pub fn profile(i: usize, extra: &[(&str, f64)]) -> ZoneProfile {
    ZoneProfile {
        zone: zone(i),
        population: 1000.0,
        area: 0.5,
        density: 2000.0,
        median_age: 35.0,
        age_ratio_20_40: 0.3,
        labor_rate: 65.0,
        median_income: 60_000.0,
        health_insurance_rate: 90.0,
        unemployment_rate: 5.0,
        extra: extra.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

pub fn spec_of(names: &[&str]) -> DemandModelSpec {
    DemandModelSpec {
        response: "trips".into(),
        predictors: names.iter().map(|n| Predictor::new(*n, &[n])).collect(),
    }
}

/// Random regression in log space: `k` positive predictors `x0..`, response
/// `exp(b0 + sum b_j ln x_j + noise)`. Returns profiles, observed values and
/// the design (with intercept column) and log response for the oracle.
pub struct Regression {
    pub profiles: Vec<ZoneProfile>,
    pub observed: BTreeMap<ZoneId, f64>,
    pub spec: DemandModelSpec,
    pub design: Vec<Vec<f64>>,
    pub response: Vec<f64>,
}

pub fn random_regression(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Regression {
    let names: Vec<String> = (0..k).map(|j| format!("x{j}")).collect();
    let beta: Vec<f64> = (0..=k).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut profiles = Vec::new();
    let mut observed = BTreeMap::new();
    let mut design = Vec::new();
    let mut response = Vec::new();
    for i in 0..n {
        let xs: Vec<f64> = (0..k).map(|_| rng.random_range(-2.0f64..2.0).exp()).collect();
        let extras: Vec<(&str, f64)> = names.iter().map(String::as_str).zip(xs.iter().copied()).collect();
        let p = profile(i, &extras);
        let mut eta = beta[0] + rng.random_range(-0.5..0.5);
        let mut row = vec![1.0];
        for (j, x) in xs.iter().enumerate() {
            eta += beta[j + 1] * x.ln();
            row.push(x.ln());
        }
        observed.insert(p.zone.clone(), eta.exp());
        profiles.push(p);
        design.push(row);
        response.push(eta);
    }
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    Regression {
        profiles,
        observed,
        spec: spec_of(&name_refs),
        design,
        response,
    }
}

/// Least squares through the normal equations `X'X b = X'y`, solved by
/// Gaussian elimination with partial pivoting.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for r in col + 1..p {
            let f = a[r][col] / a[col][col];
            for c in col..=p {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| a[i][j] * b[j]).sum();
        b[i] = (a[i][p] - s) / a[i][i];
    }
    b
}

/// Central finite-difference gradient with step `1e-6 * max(1, |x_j|)`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[j] += h;
            dn[j] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}
