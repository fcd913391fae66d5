//! Log-log trip-generation regression: fitting, diagnostics, elasticities,
//! collinearity screening, backward selection and prediction.
//!
//! The model is `ln y_i = b_0 + sum_k b_k ln x_ik + e_i`, where each
//! predictor `x_k` is a product of one or more [`ZoneProfile`] fields.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::types::{DemandForecast, ZoneId, ZoneProfile};

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_COLLINEARITY_THRESHOLD: f64 = 0.7;
pub const INTERCEPT: &str = "const";

/// One regressor: the product of the named profile fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predictor {
    pub name: String,
    pub fields: Vec<String>,
}

impl Predictor {
    pub fn new(name: impl Into<String>, fields: &[&str]) -> Self {
        Predictor {
            name: name.into(),
            fields: fields.iter().map(|f| f.to_string()).collect(),
        }
    }

    /// Raw (untransformed) value for a profile.
    pub fn value(&self, profile: &ZoneProfile) -> Result<f64> {
        let mut v = 1.0;
        for f in &self.fields {
            v *= profile.field(f).ok_or_else(|| Error::MissingField {
                zone: profile.zone.id.clone(),
                field: f.clone(),
            })?;
        }
        Ok(v)
    }

    fn log_value(&self, profile: &ZoneProfile) -> Result<f64> {
        let v = self.value(profile)?;
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::NonPositive {
                zone: profile.zone.id.clone(),
                field: self.fields.join("*"),
            });
        }
        Ok(v.ln())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandModelSpec {
    pub response: String,
    pub predictors: Vec<Predictor>,
}

impl DemandModelSpec {
    /// The four-term specification: density x age ratio, labor, income, health insurance.
    pub fn standard() -> Self {
        DemandModelSpec {
            response: "trips".into(),
            predictors: vec![
                Predictor::new("DAR", &["density", "age_ratio_20_40"]),
                Predictor::new("L", &["labor_rate"]),
                Predictor::new("I", &["median_income"]),
                Predictor::new("HI", &["health_insurance_rate"]),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.predictors.is_empty() {
            return Err(Error::Invalid("model spec needs at least one predictor".into()));
        }
        let mut seen = BTreeSet::new();
        for p in &self.predictors {
            if p.fields.is_empty() {
                return Err(Error::Invalid(format!("predictor `{}` has no fields", p.name)));
            }
            if p.name == INTERCEPT || !seen.insert(p.name.as_str()) {
                return Err(Error::Invalid(format!("duplicate predictor name `{}`", p.name)));
            }
        }
        Ok(())
    }

    fn without(&self, name: &str) -> DemandModelSpec {
        DemandModelSpec {
            response: self.response.clone(),
            predictors: self
                .predictors
                .iter()
                .filter(|p| p.name != name)
                .cloned()
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

/// Goodness-of-fit summary derived from the regression and residual sums of squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub n_obs: usize,
    pub n_predictors: usize,
    /// Regression (explained) sum of squares.
    pub ssr: f64,
    pub ssr_df: usize,
    /// Residual sum of squares.
    pub sse: f64,
    pub sse_df: usize,
    pub r_squared: f64,
    pub adj_r_squared: f64,
    pub f_statistic: f64,
    pub f_p_value: f64,
    pub residual_std_error: f64,
}

impl FitDiagnostics {
    /// Computes every diagnostic from `n`, `k` and the two sums of squares.
    pub fn from_sums(n: usize, k: usize, ssr: f64, sse: f64) -> Result<Self> {
        if n <= k + 1 {
            return Err(Error::Invalid(format!(
                "need more than k + 1 = {} observations, got {n}",
                k + 1
            )));
        }
        let df_resid = (n - k - 1) as f64;
        let r_squared = ssr / (ssr + sse);
        let adj_r_squared = 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / df_resid;
        let f_statistic = if k == 0 {
            f64::NAN
        } else {
            (ssr / k as f64) / (sse / df_resid)
        };
        let f_p_value = if k == 0 {
            f64::NAN
        } else {
            stats::f_survival(f_statistic, k as f64, df_resid)
        };
        Ok(FitDiagnostics {
            n_obs: n,
            n_predictors: k,
            ssr,
            ssr_df: k,
            sse,
            sse_df: n - k - 1,
            r_squared,
            adj_r_squared,
            f_statistic,
            f_p_value,
            residual_std_error: (sse / df_resid).sqrt(),
        })
    }
}

/// A fitted log-log demand model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    pub spec: DemandModelSpec,
    /// Intercept first, then one entry per predictor in spec order.
    pub coefficients: Vec<Coefficient>,
    pub diagnostics: FitDiagnostics,
    pub zones: Vec<ZoneId>,
    /// Log-space residuals, aligned with `zones`.
    pub residuals: Vec<f64>,
}

impl DemandModel {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0].estimate
    }

    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Plain text coefficient summary.
    pub fn summary(&self) -> String {
        let d = &self.diagnostics;
        let mut s = String::new();
        s.push_str(&format!(
            "{:<16}{:>14}{:>14}{:>10}{:>12}\n",
            "Variable", "Coefficient", "Std. Error", "t.value", "p-value"
        ));
        for c in &self.coefficients {
            s.push_str(&format!(
                "{:<16}{:>14.4}{:>14.4}{:>10.3}{:>12.4}{}\n",
                c.name,
                c.estimate,
                c.std_error,
                c.t_value,
                c.p_value,
                significance_stars(c.p_value)
            ));
        }
        s.push('\n');
        s.push_str(&format!(
            "Residual standard error: {:.3}\tSSR (df): {:.3} ({})\n",
            d.residual_std_error, d.ssr, d.ssr_df
        ));
        s.push_str(&format!(
            "Multiple R-square: {:.3}\tSSE (df): {:.3} ({})\n",
            d.r_squared, d.sse, d.sse_df
        ));
        s.push_str(&format!(
            "Adjusted R-squared: {:.3}\tF-statistic: {:.2}\n",
            d.adj_r_squared, d.f_statistic
        ));
        s.push_str(&format!("p-value: {:.4e}\nObservations: {}\n", d.f_p_value, d.n_obs));
        s
    }
}

fn significance_stars(p: f64) -> &'static str {
    if p < 0.0001 {
        " ***"
    } else if p < 0.01 {
        " **"
    } else if p < 0.05 {
        " *"
    } else {
        ""
    }
}

/// Design matrix (column-major, intercept column first) and log response.
struct Design {
    zones: Vec<ZoneId>,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
    response: Vec<f64>,
}

fn build_design(
    profiles: &[ZoneProfile],
    observed: &BTreeMap<ZoneId, f64>,
    spec: &DemandModelSpec,
) -> Result<Design> {
    spec.validate()?;
    let by_zone: BTreeMap<&ZoneId, &ZoneProfile> = profiles.iter().map(|p| (&p.zone, p)).collect();
    if let Some(missing) = observed.keys().find(|z| !by_zone.contains_key(z)) {
        return Err(Error::ZoneMismatch(format!(
            "observed zone `{}` has no profile",
            missing.id
        )));
    }
    let mut zones = Vec::new();
    let mut response = Vec::new();
    let mut columns = vec![Vec::new(); spec.predictors.len() + 1];
    for p in profiles {
        let Some(&y) = observed.get(&p.zone) else {
            continue;
        };
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::NonPositive {
                zone: p.zone.id.clone(),
                field: spec.response.clone(),
            });
        }
        zones.push(p.zone.clone());
        response.push(y.ln());
        columns[0].push(1.0);
        for (j, pred) in spec.predictors.iter().enumerate() {
            columns[j + 1].push(pred.log_value(p)?);
        }
    }
    let mut names = vec![INTERCEPT.to_string()];
    names.extend(spec.predictors.iter().map(|p| p.name.clone()));
    Ok(Design {
        zones,
        columns,
        names,
        response,
    })
}

/// Thin QR factorisation by Householder reflections.
struct Qr {
    /// Householder vectors, column-major, each of length n.
    reflectors: Vec<Vec<f64>>,
    /// Upper-triangular p x p factor, row-major.
    r: Vec<Vec<f64>>,
}

impl Qr {
    /// Factorises column-major `a` (p columns of length n). Returns the index
    /// of the first column found linearly dependent on its predecessors.
    fn factor(a: &[Vec<f64>]) -> std::result::Result<Qr, usize> {
        let n = a[0].len();
        let p = a.len();
        let mut work: Vec<Vec<f64>> = a.to_vec();
        let norms: Vec<f64> = a.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let scale = norms.iter().cloned().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let tol = 1e-10 * scale * (n as f64).sqrt();
        let mut reflectors = Vec::with_capacity(p);
        let mut r = vec![vec![0.0; p]; p];
        for j in 0..p {
            let x = &work[j];
            let tail_norm = x[j..].iter().map(|v| v * v).sum::<f64>().sqrt();
            if tail_norm <= tol.max(1e-12 * norms[j]) {
                return Err(j);
            }
            let alpha = if x[j] > 0.0 { -tail_norm } else { tail_norm };
            let mut v = vec![0.0; n];
            v[j..].copy_from_slice(&x[j..]);
            v[j] -= alpha;
            let vnorm2: f64 = v[j..].iter().map(|t| t * t).sum();
            for col in work.iter_mut().skip(j) {
                let dot: f64 = (j..n).map(|i| v[i] * col[i]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in j..n {
                    col[i] -= f * v[i];
                }
            }
            for (k, col) in work.iter().enumerate().skip(j) {
                r[j][k] = col[j];
            }
            reflectors.push(v);
        }
        Ok(Qr { reflectors, r })
    }

    /// Applies Q' to `y` in place.
    fn apply_qt(&self, y: &mut [f64]) {
        for (j, v) in self.reflectors.iter().enumerate() {
            let vnorm2: f64 = v[j..].iter().map(|t| t * t).sum();
            let dot: f64 = v[j..].iter().zip(&y[j..]).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (yi, vi) in y[j..].iter_mut().zip(&v[j..]) {
                *yi -= f * vi;
            }
        }
    }

    fn back_substitute(&self, rhs: &[f64]) -> Vec<f64> {
        let p = self.r.len();
        let mut x = vec![0.0; p];
        for i in (0..p).rev() {
            let s: f64 = (i + 1..p).map(|k| self.r[i][k] * x[k]).sum();
            x[i] = (rhs[i] - s) / self.r[i][i];
        }
        x
    }

    /// Diagonal of (R'R)^-1, i.e. squared row norms of R^-1.
    fn inverse_gram_diagonal(&self) -> Vec<f64> {
        let p = self.r.len();
        // R^-1 column by column
        let mut rinv = vec![vec![0.0; p]; p];
        for c in 0..p {
            for i in (0..=c).rev() {
                let rhs = if i == c { 1.0 } else { 0.0 };
                let s: f64 = (i + 1..=c).map(|k| self.r[i][k] * rinv[k][c]).sum();
                rinv[i][c] = (rhs - s) / self.r[i][i];
            }
        }
        rinv.iter().map(|row| row.iter().map(|v| v * v).sum()).collect()
    }
}

/// Ordinary least squares on the log-transformed data.
pub fn fit_ols(
    profiles: &[ZoneProfile],
    observed: &BTreeMap<ZoneId, f64>,
    spec: &DemandModelSpec,
) -> Result<DemandModel> {
    let design = build_design(profiles, observed, spec)?;
    let n = design.response.len();
    let p = design.columns.len();
    if n <= p {
        return Err(Error::Invalid(format!(
            "need more than k + 1 = {p} observations, got {n}"
        )));
    }
    let qr = Qr::factor(&design.columns).map_err(|j| Error::RankDeficient {
        column: design.names[j].clone(),
    })?;
    let mut qty = design.response.clone();
    qr.apply_qt(&mut qty);
    let beta = qr.back_substitute(&qty[..p]);

    let residuals: Vec<f64> = (0..n)
        .map(|i| {
            let fitted: f64 = design.columns.iter().zip(&beta).map(|(c, b)| c[i] * b).sum();
            design.response[i] - fitted
        })
        .collect();
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let ybar = stats::mean(&design.response);
    let sst: f64 = design.response.iter().map(|y| (y - ybar) * (y - ybar)).sum();
    let ssr = (sst - sse).max(0.0);
    let k = p - 1;
    let diagnostics = FitDiagnostics::from_sums(n, k, ssr, sse)?;

    let sigma2 = sse / (n - p) as f64;
    let df = (n - p) as f64;
    let coefficients = qr
        .inverse_gram_diagonal()
        .into_iter()
        .zip(&beta)
        .zip(&design.names)
        .map(|((g, &b), name)| {
            let se = (sigma2 * g).sqrt();
            let t = b / se;
            Coefficient {
                name: name.clone(),
                estimate: b,
                std_error: se,
                t_value: t,
                p_value: stats::t_two_sided_p(t, df),
            }
        })
        .collect();

    Ok(DemandModel {
        spec: spec.clone(),
        coefficients,
        diagnostics,
        zones: design.zones,
        residuals,
    })
}

/// One step of backward elimination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub predictor: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub model: DemandModel,
    pub removed: Vec<Removal>,
}

/// Repeatedly drops the least significant predictor until every remaining
/// p-value is at most `alpha`. The intercept is never dropped.
pub fn backward_select(
    profiles: &[ZoneProfile],
    observed: &BTreeMap<ZoneId, f64>,
    spec: &DemandModelSpec,
    alpha: f64,
) -> Result<SelectionResult> {
    let mut current = spec.clone();
    let mut removed = Vec::new();
    loop {
        let model = fit_ols(profiles, observed, &current)?;
        let worst = model
            .coefficients
            .iter()
            .skip(1)
            .fold(None::<&Coefficient>, |acc, c| match acc {
                Some(a) if a.p_value >= c.p_value => Some(a),
                _ => Some(c),
            })
            .cloned();
        match worst {
            Some(c) if c.p_value > alpha => {
                removed.push(Removal {
                    predictor: c.name.clone(),
                    p_value: c.p_value,
                });
                if current.predictors.len() == 1 {
                    return Err(Error::NoSignificantPredictors { alpha });
                }
                current = current.without(&c.name);
            }
            _ => return Ok(SelectionResult { model, removed }),
        }
    }
}

/// A flagged predictor pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedPair {
    pub first: String,
    pub second: String,
    pub r: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CollinearityReport {
    pub threshold: f64,
    pub pairs: Vec<CorrelatedPair>,
    /// Predictors with zero variance across zones.
    pub degenerate: Vec<String>,
}

impl CollinearityReport {
    /// Correlation of a flagged pair, in either order.
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        self.pairs
            .iter()
            .find(|p| (p.first == a && p.second == b) || (p.first == b && p.second == a))
            .map(|p| p.r)
    }
}

/// Flags predictor pairs whose raw values have `|r| >= threshold`.
pub fn screen_collinearity(
    profiles: &[ZoneProfile],
    spec: &DemandModelSpec,
    threshold: f64,
) -> Result<CollinearityReport> {
    spec.validate()?;
    if profiles.len() < 3 {
        return Err(Error::Invalid(format!(
            "collinearity screen needs at least 3 observations, got {}",
            profiles.len()
        )));
    }
    let columns: Vec<Vec<f64>> = spec
        .predictors
        .iter()
        .map(|p| profiles.iter().map(|z| p.value(z)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut report = CollinearityReport {
        threshold,
        ..Default::default()
    };
    let degenerate: Vec<bool> = columns
        .iter()
        .map(|c| c.iter().all(|v| *v == c[0]))
        .collect();
    for (p, &d) in spec.predictors.iter().zip(&degenerate) {
        if d {
            report.degenerate.push(p.name.clone());
        }
    }
    for a in 0..columns.len() {
        for b in a + 1..columns.len() {
            if degenerate[a] || degenerate[b] {
                continue;
            }
            if let Some(r) = stats::pearson(&columns[a], &columns[b]) {
                if r.abs() >= threshold {
                    report.pairs.push(CorrelatedPair {
                        first: spec.predictors[a].name.clone(),
                        second: spec.predictors[b].name.clone(),
                        r,
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Multiplicative change in ridership when a predictor grows by `pct_change`
/// (0.01 for +1%): `(1 + pct_change)^elasticity`.
pub fn elasticity_effect(elasticity: f64, pct_change: f64) -> f64 {
    (elasticity * pct_change.ln_1p()).exp()
}

/// Applies a fitted model to new zones.
pub fn predict(model: &DemandModel, profiles: &[ZoneProfile]) -> Result<Vec<DemandForecast>> {
    profiles
        .iter()
        .map(|p| {
            let mut eta = model.intercept();
            for (pred, c) in model.spec.predictors.iter().zip(model.coefficients.iter().skip(1)) {
                eta += c.estimate * pred.log_value(p)?;
            }
            DemandForecast::new(p.zone.clone(), eta.exp())
        })
        .collect()
}
