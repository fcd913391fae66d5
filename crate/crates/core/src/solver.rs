//! Minimisation over a box: plain projected gradient, and a projected
//! Gauss-Newton/Levenberg-Marquardt variant for least-squares objectives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A smooth (or piecewise-smooth) objective over `lower <= x <= upper`.
pub trait BoundedProblem {
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    /// Objective value and gradient at `x`.
    fn value_grad(&self, x: &[f64]) -> (f64, Vec<f64>);
}

/// A sum of squares `f(x) = |r(x)|^2` over a box.
pub trait LeastSquaresProblem {
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];
    /// Residuals and their Jacobian (row-major, residuals x parameters).
    fn residuals_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Converged when the projected-gradient norm is at most `gradient_tol * (1 + |f|)`.
    pub gradient_tol: f64,
    /// Converged when the relative decrease over `stall_window` iterations falls below this.
    pub stall_tol: f64,
    pub stall_window: usize,
    /// Sufficient-decrease constant for the Armijo test.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 10_000,
            gradient_tol: 1e-8,
            stall_tol: 1e-12,
            stall_window: 5,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Norm of `P(x - g) - x`, the projected gradient.
    pub projected_gradient_norm: f64,
}

pub fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(lo, hi);
    }
}

/// Norm of the projected gradient `P(x - g) - x`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            let d = (xi - gi).clamp(lo, hi) - xi;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_finite(f: f64, iteration: usize, x: &[f64]) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteObjective {
            iteration,
            iterate: x.to_vec(),
        })
    }
}

/// Projected gradient descent with Barzilai-Borwein initial steps and
/// Armijo backtracking (step halving) along the projection arc.
pub fn minimize<P: BoundedProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &SolverConfig,
) -> Result<SolveReport> {
    let lower = problem.lower();
    let upper = problem.upper();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut f, mut g) = problem.value_grad(&x);
    check_finite(f, 0, &x)?;

    let mut history = vec![f];
    let mut pg = projected_gradient_norm(&x, &g, lower, upper);
    let mut step = if pg > 0.0 { 1.0 / pg } else { 1.0 };
    let mut iterations = 0;
    let mut converged = pg <= config.gradient_tol * (1.0 + f.abs());

    while !converged && iterations < config.max_iterations {
        iterations += 1;
        let mut accepted = None;
        let mut t = step;
        for _ in 0..=config.max_backtracks {
            let mut trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            project(&mut trial, lower, upper);
            let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &s);
            if decrease >= 0.0 {
                // projection collapsed the step
                break;
            }
            let (ft, gt) = problem.value_grad(&trial);
            if ft.is_finite() && ft <= f + config.armijo * decrease {
                accepted = Some((trial, ft, gt, s));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new, g_new, s)) = accepted else {
            // no descent possible along the projected arc: the stall rule holds
            converged = true;
            break;
        };
        check_finite(f_new, iterations, &x_new)?;
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let ss = dot(&s, &s);
        step = if sy > 0.0 { (ss / sy).clamp(1e-20, 1e20) } else { 2.0 * t };

        x = x_new;
        f = f_new;
        g = g_new;
        pg = projected_gradient_norm(&x, &g, lower, upper);
        history.push(f);

        if pg <= config.gradient_tol * (1.0 + f.abs()) {
            converged = true;
        } else if history.len() > config.stall_window {
            let old = history[history.len() - 1 - config.stall_window];
            if f == 0.0 || (old - f) / old.abs().max(f64::MIN_POSITIVE) < config.stall_tol {
                converged = true;
            }
        }
    }

    Ok(SolveReport {
        x,
        value: f,
        iterations,
        converged,
        projected_gradient_norm: pg,
    })
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Gradient `2 J'r` of `|r|^2`.
fn ls_gradient(r: &[f64], jac: &[f64], dim: usize) -> Vec<f64> {
    let mut g = vec![0.0; dim];
    for (i, ri) in r.iter().enumerate() {
        for (gj, jij) in g.iter_mut().zip(&jac[i * dim..(i + 1) * dim]) {
            *gj += 2.0 * ri * jij;
        }
    }
    g
}

/// Solves the symmetric positive definite system `a x = b` in place by
/// Cholesky; `None` if `a` is not numerically positive definite.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], n: usize) -> Option<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= a[i * n + k] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= a[k * n + i] * b[k];
        }
        b[i] = s / a[i * n + i];
    }
    Some(())
}

/// Variables free to move: not pinned at a bound by a gradient pointing outward.
fn free_set(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<usize> {
    (0..x.len())
        .filter(|&i| !((x[i] <= lower[i] && g[i] > 0.0) || (x[i] >= upper[i] && g[i] < 0.0)))
        .collect()
}

/// Damped Gauss-Newton direction on the free variables, zero elsewhere.
fn lm_direction(r: &[f64], jac: &[f64], dim: usize, free: &[usize], damping: f64) -> Option<Vec<f64>> {
    let n = free.len();
    if n == 0 {
        return None;
    }
    let mut a = vec![0.0; n * n];
    let mut b = vec![0.0; n];
    for (i, ri) in r.iter().enumerate() {
        let row = &jac[i * dim..(i + 1) * dim];
        for (p, &fp) in free.iter().enumerate() {
            let jp = row[fp];
            if jp == 0.0 {
                continue;
            }
            b[p] -= jp * ri;
            for (q, &fq) in free.iter().enumerate().take(p + 1) {
                a[p * n + q] += jp * row[fq];
            }
        }
    }
    let max_diag = (0..n).map(|p| a[p * n + p]).fold(0.0, f64::max);
    if !(max_diag > 0.0) {
        return None;
    }
    for p in 0..n {
        for q in 0..p {
            a[q * n + p] = a[p * n + q];
        }
        let d = a[p * n + p].max(1e-12 * max_diag);
        a[p * n + p] += damping * d + 1e-15 * max_diag;
    }
    cholesky_solve(&mut a, &mut b, n)?;
    let mut step = vec![0.0; dim];
    for (p, &fp) in free.iter().enumerate() {
        step[fp] = b[p];
    }
    Some(step)
}

/// Bounded least squares. Each iteration tries a Levenberg-Marquardt step on
/// the free variables, projected onto the box and accepted under the Armijo
/// condition; when damping cannot produce an acceptable step it falls back
/// to a projected-gradient step with Barzilai-Borwein length and halving.
/// Stopping rules are those of [`minimize`].
pub fn minimize_least_squares<P: LeastSquaresProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &SolverConfig,
) -> Result<SolveReport> {
    let lower = problem.lower();
    let upper = problem.upper();
    let dim = lower.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut r, mut jac) = problem.residuals_jacobian(&x);
    let mut f = sum_sq(&r);
    check_finite(f, 0, &x)?;
    let mut g = ls_gradient(&r, &jac, dim);
    let mut pg = projected_gradient_norm(&x, &g, lower, upper);
    let mut history = vec![f];
    let mut damping = 1e-3;
    let mut bb_step = if pg > 0.0 { 1.0 / pg } else { 1.0 };
    let mut iterations = 0;
    let mut converged = pg <= config.gradient_tol * (1.0 + f.abs());

    while !converged && iterations < config.max_iterations {
        iterations += 1;
        let free = free_set(&x, &g, lower, upper);
        let mut accepted: Option<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> = None;

        for _ in 0..20 {
            let Some(step) = lm_direction(&r, &jac, dim, &free, damping) else {
                break;
            };
            let mut trial: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            project(&mut trial, lower, upper);
            let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &s);
            if decrease < 0.0 {
                let (rt, jt) = problem.residuals_jacobian(&trial);
                let ft = sum_sq(&rt);
                if ft.is_finite() && ft <= f + config.armijo * decrease {
                    damping = (damping / 3.0).max(1e-12);
                    accepted = Some((trial, rt, jt, ft));
                    break;
                }
            }
            damping = (damping * 4.0).min(1e12);
        }

        if accepted.is_none() {
            let mut t = bb_step;
            for _ in 0..=config.max_backtracks {
                let mut trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
                project(&mut trial, lower, upper);
                let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
                let decrease = dot(&g, &s);
                if decrease >= 0.0 {
                    break;
                }
                let (rt, jt) = problem.residuals_jacobian(&trial);
                let ft = sum_sq(&rt);
                if ft.is_finite() && ft <= f + config.armijo * decrease {
                    accepted = Some((trial, rt, jt, ft));
                    break;
                }
                t *= 0.5;
            }
        }

        let Some((x_new, r_new, jac_new, f_new)) = accepted else {
            // no step decreases f: zero relative decrease, so the stall rule holds
            converged = true;
            break;
        };
        check_finite(f_new, iterations, &x_new)?;
        let g_new = ls_gradient(&r_new, &jac_new, dim);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 0.0 {
            bb_step = (dot(&s, &s) / sy).clamp(1e-20, 1e20);
        }
        x = x_new;
        r = r_new;
        jac = jac_new;
        f = f_new;
        g = g_new;
        pg = projected_gradient_norm(&x, &g, lower, upper);
        history.push(f);

        if pg <= config.gradient_tol * (1.0 + f.abs()) {
            converged = true;
        } else if history.len() > config.stall_window {
            let old = history[history.len() - 1 - config.stall_window];
            if f == 0.0 || (old - f) / old.abs().max(f64::MIN_POSITIVE) < config.stall_tol {
                converged = true;
            }
        }
    }

    Ok(SolveReport {
        x,
        value: f,
        iterations,
        converged,
        projected_gradient_norm: pg,
    })
}
