//! Least squares and ridge regression with an unpenalized intercept.
//!
//! Columns and targets are centred, then the centred design is decomposed as
//! `U S V^T` and `w = V diag(s / (s^2 + alpha)) U^T y_c`. With `alpha = 0`
//! singular values below `max(n, d) * eps * s_max` are dropped, which gives
//! the minimum-norm solution for rank-deficient designs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
    }
}

/// Column means and the centred design as a matrix.
pub(crate) fn centre(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64, DMatrix<f64>, DVector<f64>) {
    let n = y.len();
    let d = x.first().map_or(0, Vec::len);
    let nf = n as f64;
    let mut x_mean = vec![0.0; d];
    for row in x {
        for (m, v) in x_mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    x_mean.iter_mut().for_each(|m| *m /= nf);
    let y_mean = y.iter().sum::<f64>() / nf;
    let xc = DMatrix::from_fn(n, d, |i, j| x[i][j] - x_mean[j]);
    let yc = DVector::from_iterator(n, y.iter().map(|v| v - y_mean));
    (x_mean, y_mean, xc, yc)
}

pub fn fit_linear(x: &[Vec<f64>], y: &[f64], alpha: f64) -> Result<LinearModel> {
    super::tree::check_xy(x, y)?;
    if y.is_empty() {
        return Err(Error::InvalidInput("cannot fit on no samples".into()));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("alpha must be >= 0, got {alpha}")));
    }
    let (x_mean, y_mean, xc, yc) = centre(x, y);
    let (n, d) = xc.shape();
    let mut w = DVector::zeros(d);
    if n > 1 && d > 0 {
        let svd = xc.svd(true, true);
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let s_max = svd.singular_values.max();
        let cutoff = if alpha == 0.0 {
            n.max(d) as f64 * f64::EPSILON * s_max
        } else {
            0.0
        };
        for (k, &s) in svd.singular_values.iter().enumerate() {
            if s <= cutoff || s == 0.0 {
                continue;
            }
            let proj = u.column(k).dot(&yc);
            let factor = s / (s * s + alpha) * proj;
            w += v_t.row(k).transpose() * factor;
        }
    }
    let coef: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - coef.iter().zip(&x_mean).map(|(a, b)| a * b).sum::<f64>();
    Ok(LinearModel { coef, intercept })
}
