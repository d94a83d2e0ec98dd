//! Gaussian process regression with a dot-product plus white-noise kernel.
//!
//! `k(a, b) = sigma0_sq + a.b`, observation covariance `K + noise I`. The
//! predictive mean at `x*` is `k*^T (K + noise I)^-1 y`, solved through a
//! Cholesky factor. In coarse-grid mode both hyperparameters range over 13
//! log-spaced values in `[1e-2, 1e2]` and the pair with the highest log
//! marginal likelihood wins; ties keep the earlier pair (sigma0_sq outer,
//! noise inner).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRID_POINTS: usize = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpOptimize {
    Fixed,
    #[default]
    CoarseGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub x: Vec<Vec<f64>>,
    /// `(K + noise I)^-1 y`.
    pub weights: Vec<f64>,
    pub sigma0_sq: f64,
    pub noise: f64,
    pub log_marginal_likelihood: f64,
    /// Added to every prediction.
    #[serde(default)]
    pub target_offset: f64,
}

impl GpModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let k: f64 = self
            .x
            .iter()
            .zip(&self.weights)
            .map(|(xi, a)| a * kernel(self.sigma0_sq, xi, row))
            .sum();
        self.target_offset + k
    }
}

pub fn kernel(sigma0_sq: f64, a: &[f64], b: &[f64]) -> f64 {
    sigma0_sq + a.iter().zip(b).map(|(u, v)| u * v).sum::<f64>()
}

/// Log-spaced hyperparameter grid `10^(-2 + 4 i / 12)`.
pub fn coarse_grid() -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| 10f64.powf(-2.0 + 4.0 * i as f64 / (GRID_POINTS - 1) as f64))
        .collect()
}

struct Solved {
    weights: DVector<f64>,
    lml: f64,
}

fn solve(x: &[Vec<f64>], y: &[f64], sigma0_sq: f64, noise: f64) -> Result<Solved> {
    let n = y.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| kernel(sigma0_sq, &x[i], &x[j]));
    for i in 0..n {
        k[(i, i)] += noise;
    }
    let chol = factor(k)?;
    let yv = DVector::from_column_slice(y);
    let weights = chol.solve(&yv);
    let l = chol.l_dirty();
    let log_det_half: f64 = (0..n).map(|i| l[(i, i)].ln()).sum();
    let lml = -0.5 * yv.dot(&weights)
        - log_det_half
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Ok(Solved { weights, lml })
}

/// Cholesky with escalating diagonal jitter `1e-10 * trace / n`, times 10 up
/// to three times.
fn factor(k: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(k.clone()) {
        return Ok(c);
    }
    let n = k.nrows();
    let mut jitter = 1e-10 * k.trace() / n as f64;
    for _ in 0..3 {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok(c);
        }
        jitter *= 10.0;
    }
    Err(Error::Fit("gaussian process covariance is not positive definite".into()))
}

pub fn fit_gp(
    x: &[Vec<f64>],
    y: &[f64],
    sigma0_sq: f64,
    noise: f64,
    optimize: GpOptimize,
) -> Result<GpModel> {
    super::tree::check_xy(x, y)?;
    if y.is_empty() {
        return Err(Error::InvalidInput("cannot fit on no samples".into()));
    }
    let (s0, nz, solved) = match optimize {
        GpOptimize::Fixed => (sigma0_sq, noise, solve(x, y, sigma0_sq, noise)?),
        GpOptimize::CoarseGrid => {
            let grid = coarse_grid();
            let mut best: Option<(f64, f64, Solved)> = None;
            for &s0 in &grid {
                for &nz in &grid {
                    let Ok(s) = solve(x, y, s0, nz) else { continue };
                    if best.as_ref().is_none_or(|b| s.lml > b.2.lml) {
                        best = Some((s0, nz, s));
                    }
                }
            }
            best.ok_or_else(|| Error::Fit("no grid point gave a valid factorization".into()))?
        }
    };
    Ok(GpModel {
        x: x.to_vec(),
        weights: solved.weights.iter().copied().collect(),
        sigma0_sq: s0,
        noise: nz,
        log_marginal_likelihood: solved.lml,
        target_offset: 0.0,
    })
}

/// [`fit_gp`] on targets centred at their mean; the mean is restored in
/// predictions.
pub fn fit_gp_centered(
    x: &[Vec<f64>],
    y: &[f64],
    sigma0_sq: f64,
    noise: f64,
    optimize: GpOptimize,
) -> Result<GpModel> {
    let mean = y.iter().sum::<f64>() / y.len().max(1) as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let mut m = fit_gp(x, &yc, sigma0_sq, noise, optimize)?;
    m.target_offset = mean;
    Ok(m)
}
