//! Linear epsilon-insensitive support vector regression.
//!
//! Primal: `min 1/2 |w|^2 + C sum_i max(0, |y_i - w.x_i - b| - eps)`.
//!
//! Dual, with `beta_i = alpha_i - alpha*_i`:
//!
//! `max  -1/2 beta^T K beta + y^T beta - eps |beta|_1`
//! `s.t. sum_i beta_i = 0,  -C <= beta_i <= C`,  `K = X X^T`.
//!
//! The equality constraint rules out single-variable moves, so each step
//! moves along `e_i - e_j`, which keeps the sum fixed. Along that direction
//! the dual is a concave piecewise quadratic in the step length and is
//! maximized exactly. Sweeps over all pairs repeat until the largest
//! single-step improvement of a sweep falls below `tol`. The intercept is
//! then chosen to minimize the primal for the final `w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub dual: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

impl SvrModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Primal objective of `(w, b)`.
pub fn primal_objective(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, c: f64, epsilon: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(row, t)| {
            let f = b + w.iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
            ((t - f).abs() - epsilon).max(0.0)
        })
        .sum();
    reg + c * loss
}

pub fn fit_svr(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    epsilon: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<SvrModel> {
    super::tree::check_xy(x, y)?;
    if y.is_empty() {
        return Err(Error::InvalidInput("cannot fit on no samples".into()));
    }
    let n = y.len();
    let d = x[0].len();
    let k: Vec<Vec<f64>> = x
        .iter()
        .map(|a| x.iter().map(|b| dot(a, b)).collect())
        .collect();

    let mut beta = vec![0.0; n];
    let mut kb = vec![0.0; n];
    let mut sweeps = 0;
    let mut converged = n < 2;
    while !converged && sweeps < max_sweeps {
        sweeps += 1;
        let mut max_gain: f64 = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let eta = k[i][i] + k[j][j] - 2.0 * k[i][j];
                let g = (y[i] - kb[i]) - (y[j] - kb[j]);
                let (t, gain) = pair_step(beta[i], beta[j], g, eta.max(0.0), c, epsilon);
                if gain > 0.0 && t != 0.0 {
                    beta[i] += t;
                    beta[j] -= t;
                    for (l, v) in kb.iter_mut().enumerate() {
                        *v += t * (k[l][i] - k[l][j]);
                    }
                    max_gain = max_gain.max(gain);
                }
            }
        }
        converged = max_gain < tol;
    }

    let mut w = vec![0.0; d];
    for (row, b) in x.iter().zip(&beta) {
        for (wi, xi) in w.iter_mut().zip(row) {
            *wi += b * xi;
        }
    }
    let residuals: Vec<f64> = x.iter().zip(y).map(|(row, t)| t - dot(&w, row)).collect();
    let intercept = best_intercept(&residuals, epsilon);
    Ok(SvrModel {
        coef: w,
        intercept,
        dual: beta,
        sweeps,
        converged,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Dual improvement of moving `beta_i += t`, `beta_j -= t`.
fn pair_gain(bi: f64, bj: f64, g: f64, eta: f64, eps: f64, t: f64) -> f64 {
    g * t - 0.5 * eta * t * t - eps * ((bi + t).abs() + (bj - t).abs() - bi.abs() - bj.abs())
}

/// Exact maximizer of the pair objective over the feasible step interval.
fn pair_step(bi: f64, bj: f64, g: f64, eta: f64, c: f64, eps: f64) -> (f64, f64) {
    let lo = (-c - bi).max(bj - c);
    let hi = (c - bi).min(bj + c);
    if hi <= lo {
        return (0.0, 0.0);
    }
    let mut knots = vec![lo, hi];
    for p in [-bi, bj] {
        if p > lo && p < hi {
            knots.push(p);
        }
    }
    knots.sort_by(f64::total_cmp);

    let mut best = (0.0, 0.0);
    let mut consider = |t: f64| {
        let gain = pair_gain(bi, bj, g, eta, eps, t);
        if gain > best.1 {
            best = (t, gain);
        }
    };
    for seg in knots.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        consider(a);
        consider(b);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let s1 = (bi + mid).signum();
        let s2 = (bj - mid).signum();
        let slope = g - eps * (s1 - s2);
        if eta > 0.0 {
            consider((slope / eta).clamp(a, b));
        }
    }
    best
}

/// Minimizer of `sum_i max(0, |r_i - b| - eps)` over `b`. The objective is
/// convex and piecewise linear, so its minimizers form an interval whose ends
/// are knots `r_i +- eps`; the midpoint of that interval is returned.
fn best_intercept(residuals: &[f64], eps: f64) -> f64 {
    let cost = |b: f64| -> f64 {
        residuals
            .iter()
            .map(|r| ((r - b).abs() - eps).max(0.0))
            .sum()
    };
    let mut knots: Vec<f64> = residuals.iter().flat_map(|r| [r - eps, r + eps]).collect();
    knots.sort_by(f64::total_cmp);
    let costs: Vec<f64> = knots.iter().map(|&b| cost(b)).collect();
    let min = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * (1.0 + min.abs());
    let at_min: Vec<f64> = knots
        .iter()
        .zip(&costs)
        .filter(|(_, c)| **c <= min + slack)
        .map(|(k, _)| *k)
        .collect();
    0.5 * (at_min[0] + at_min[at_min.len() - 1])
}
