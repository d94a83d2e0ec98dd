//! L1-penalized least squares by coordinate descent.
//!
//! Minimizes `(1/2n) |y - Xw - b|^2 + alpha |w|_1` on centred data. Each
//! coordinate update is the soft-threshold
//!
//! `w_j <- S(rho_j, alpha) / z_j`, `rho_j = x_j . r / n + z_j w_j`, `z_j = |x_j|^2 / n`
//!
//! where `r` is the current residual. A sweep visits every coordinate once,
//! in a fresh random order when `selection = random`.

use serde::{Deserialize, Serialize};

use super::linear::centre;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Cyclic,
    #[default]
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub sweeps: usize,
    /// False when `max_iter` sweeps ran out before the tolerance was met.
    pub converged: bool,
}

impl LassoModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn fit_lasso(
    x: &[Vec<f64>],
    y: &[f64],
    alpha: f64,
    max_iter: usize,
    tol: f64,
    selection: Selection,
    seed: u64,
) -> Result<LassoModel> {
    super::tree::check_xy(x, y)?;
    if y.is_empty() {
        return Err(Error::InvalidInput("cannot fit on no samples".into()));
    }
    let (x_mean, y_mean, xc, yc) = centre(x, y);
    let (n, d) = xc.shape();
    let nf = n as f64;
    let z: Vec<f64> = (0..d).map(|j| xc.column(j).norm_squared() / nf).collect();
    let mut w = vec![0.0; d];
    let mut r: Vec<f64> = yc.iter().copied().collect();
    let mut order: Vec<usize> = (0..d).collect();
    let mut rng = SplitMix64::new(seed);
    let mut converged = d == 0;
    let mut sweeps = 0;

    while !converged && sweeps < max_iter {
        sweeps += 1;
        if selection == Selection::Random {
            rng.shuffle(&mut order);
        }
        let mut max_change: f64 = 0.0;
        for &j in &order {
            if z[j] == 0.0 {
                continue;
            }
            let col = xc.column(j);
            let rho = col.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>() / nf + z[j] * w[j];
            let new = soft_threshold(rho, alpha) / z[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (ri, xi) in r.iter_mut().zip(col.iter()) {
                    *ri -= delta * xi;
                }
                w[j] = new;
            }
            max_change = max_change.max(delta.abs());
        }
        converged = max_change < tol;
    }

    let intercept = y_mean - w.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    Ok(LassoModel {
        coef: w,
        intercept,
        sweeps,
        converged,
    })
}
