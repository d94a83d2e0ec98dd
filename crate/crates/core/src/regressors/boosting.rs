//! Gradient boosting with Huber loss.
//!
//! Start from the median of the targets. Each round:
//!
//! 1. `delta` = `huber_alpha` quantile (linear interpolation) of `|y - F|`;
//! 2. pseudo-residuals = residuals clipped to `[-delta, delta]`;
//! 3. fit a tree to the pseudo-residuals;
//! 4. replace each leaf value by `median(r) + mean(clip(r - median(r), delta))`
//!    over the raw residuals `r` of the rows in that leaf;
//! 5. `F <- F + learning_rate * tree`.
//!
//! The squared-error variant starts from the mean, fits raw residuals and
//! uses the leaf mean of residuals.

use serde::{Deserialize, Serialize};

use super::tree::{median, Tree, TreeOptions};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GbLoss {
    #[default]
    Huber,
    SquaredError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbModel {
    pub init: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GbModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.init
            + self
                .trees
                .iter()
                .map(|t| self.learning_rate * t.predict_row(row))
                .sum::<f64>()
    }
}

/// Quantile with linear interpolation between order statistics
/// (position `q (n - 1)`).
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Mean Huber loss of residuals `y - f` with `delta` taken as the `alpha`
/// quantile of their absolute values.
pub fn huber_loss(y: &[f64], f: &[f64], alpha: f64) -> f64 {
    let r: Vec<f64> = y.iter().zip(f).map(|(a, b)| a - b).collect();
    let abs: Vec<f64> = r.iter().map(|v| v.abs()).collect();
    let delta = quantile(&abs, alpha);
    huber_loss_with_delta(&r, delta)
}

pub fn huber_loss_with_delta(residuals: &[f64], delta: f64) -> f64 {
    residuals
        .iter()
        .map(|r| {
            let a = r.abs();
            if a <= delta {
                0.5 * r * r
            } else {
                delta * (a - 0.5 * delta)
            }
        })
        .sum::<f64>()
        / residuals.len() as f64
}

pub fn fit_gradient_boosting(
    x: &[Vec<f64>],
    y: &[f64],
    loss: GbLoss,
    huber_alpha: f64,
    learning_rate: f64,
    n_estimators: usize,
    tree_opts: &TreeOptions,
) -> Result<GbModel> {
    super::tree::check_xy(x, y)?;
    let n = y.len();
    if n < 2 {
        return Err(Error::Fit("gradient boosting needs at least 2 samples".into()));
    }
    let init = match loss {
        GbLoss::Huber => median(y),
        GbLoss::SquaredError => y.iter().sum::<f64>() / n as f64,
    };
    let mut f = vec![init; n];
    let mut trees = Vec::new();
    let all: Vec<usize> = (0..n).collect();
    let mut rng = SplitMix64::new(0);

    for _ in 0..n_estimators {
        let resid: Vec<f64> = y.iter().zip(&f).map(|(a, b)| a - b).collect();
        if resid.iter().all(|r| *r == 0.0) {
            break;
        }
        let (targets, delta) = match loss {
            GbLoss::Huber => {
                let abs: Vec<f64> = resid.iter().map(|r| r.abs()).collect();
                let delta = quantile(&abs, huber_alpha);
                (resid.iter().map(|r| r.clamp(-delta, delta)).collect(), delta)
            }
            GbLoss::SquaredError => (resid.clone(), f64::INFINITY),
        };
        let mut tree = Tree::fit_indices(x, &targets, &all, tree_opts, &mut rng);

        let leaves: Vec<usize> = x.iter().map(|row| tree.leaf_of(row)).collect();
        let mut members: std::collections::BTreeMap<usize, Vec<f64>> = Default::default();
        for (leaf, r) in leaves.iter().zip(&resid) {
            members.entry(*leaf).or_default().push(*r);
        }
        for (leaf, rs) in &members {
            let value = match loss {
                GbLoss::Huber => {
                    let med = median(rs);
                    med + rs
                        .iter()
                        .map(|r| (r - med).clamp(-delta, delta))
                        .sum::<f64>()
                        / rs.len() as f64
                }
                GbLoss::SquaredError => rs.iter().sum::<f64>() / rs.len() as f64,
            };
            tree.set_leaf_value(*leaf, value);
        }
        for (fi, row) in f.iter_mut().zip(x) {
            *fi += learning_rate * tree.predict_row(row);
        }
        trees.push(tree);
    }
    Ok(GbModel {
        init,
        learning_rate,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
        assert!((quantile(&[0.0, 10.0], 0.85) - 8.5).abs() < 1e-12);
        assert_eq!(quantile(&[4.0, 1.0, 3.0], 1.0), 4.0);
    }

    #[test]
    fn huber_branches() {
        assert_eq!(huber_loss_with_delta(&[1.0, -3.0], 2.0), (0.5 + 2.0 * 2.0) / 2.0);
    }

    #[test]
    fn constant_targets_need_no_rounds() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let m = fit_gradient_boosting(&x, &[4.0; 3], GbLoss::Huber, 0.85, 1.0, 100, &TreeOptions::default())
            .unwrap();
        assert!(m.trees.is_empty());
        assert_eq!(m.predict_row(&[9.0]), 4.0);
    }
}
