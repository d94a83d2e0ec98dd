//! AdaBoost.R2 with regression-tree base learners.
//!
//! Each round draws a weighted bootstrap, fits a tree, scores every training
//! row with a loss normalised by the largest absolute residual and reweights:
//!
//! `Lbar = sum w_i L_i`, `beta = Lbar / (1 - Lbar)`,
//! `w_i <- w_i * beta^(lr (1 - L_i))`, estimator weight `lr ln(1 / beta)`.
//!
//! Prediction is the weighted median of the member predictions.

use serde::{Deserialize, Serialize};

use super::tree::{Criterion, Tree, TreeOptions};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoostLoss {
    #[default]
    Linear,
    Square,
    Exponential,
}

impl BoostLoss {
    fn apply(self, normalised: f64) -> f64 {
        match self {
            BoostLoss::Linear => normalised,
            BoostLoss::Square => normalised * normalised,
            BoostLoss::Exponential => 1.0 - (-normalised).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub estimators: Vec<Tree>,
    pub estimator_weights: Vec<f64>,
}

/// Outcome of one reweighting step.
#[derive(Debug, Clone, PartialEq)]
pub struct Reweight {
    pub average_loss: f64,
    pub beta: f64,
    pub estimator_weight: f64,
    /// Normalised to sum 1.
    pub weights: Vec<f64>,
}

/// One AdaBoost.R2 update from per-row losses in `[0, 1]`. Returns `None`
/// when the average loss is at least 0.5 (boosting stops).
pub fn reweight(weights: &[f64], losses: &[f64], learning_rate: f64) -> Option<Reweight> {
    let average_loss: f64 = weights.iter().zip(losses).map(|(w, l)| w * l).sum();
    if average_loss >= 0.5 {
        return None;
    }
    let beta = average_loss / (1.0 - average_loss);
    let estimator_weight = learning_rate * (1.0 / beta).ln();
    let mut new: Vec<f64> = weights
        .iter()
        .zip(losses)
        .map(|(w, l)| w * beta.powf(learning_rate * (1.0 - l)))
        .collect();
    let total: f64 = new.iter().sum();
    new.iter_mut().for_each(|w| *w /= total);
    Some(Reweight {
        average_loss,
        beta,
        estimator_weight,
        weights: new,
    })
}

fn weighted_bootstrap(weights: &[f64], rng: &mut SplitMix64) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    let last = weights.len() - 1;
    (0..weights.len())
        .map(|_| {
            let u = rng.next_f64() * acc;
            cdf.partition_point(|&c| c <= u).min(last)
        })
        .collect()
}

/// Value at which the cumulative weight (members sorted by prediction)
/// first reaches half the total.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let half = 0.5 * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if acc >= half {
            return values[i];
        }
    }
    values[order[order.len() - 1]]
}

impl AdaBoostModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let preds: Vec<f64> = self.estimators.iter().map(|t| t.predict_row(row)).collect();
        weighted_median(&preds, &self.estimator_weights)
    }
}

pub fn fit_adaboost(
    x: &[Vec<f64>],
    y: &[f64],
    n_estimators: usize,
    learning_rate: f64,
    loss: BoostLoss,
    base_max_depth: Option<usize>,
    seed: u64,
) -> Result<AdaBoostModel> {
    super::tree::check_xy(x, y)?;
    let n = y.len();
    if n < 2 {
        return Err(Error::Fit("adaboost needs at least 2 samples".into()));
    }
    let opts = TreeOptions {
        max_depth: base_max_depth,
        criterion: Criterion::Mse,
        max_features: None,
    };
    let mut rng = SplitMix64::new(seed);
    let mut weights = vec![1.0 / n as f64; n];
    let mut model = AdaBoostModel {
        estimators: Vec::new(),
        estimator_weights: Vec::new(),
    };

    for round in 0..n_estimators {
        let idx = weighted_bootstrap(&weights, &mut rng);
        let tree = Tree::fit_indices(x, y, &idx, &opts, &mut rng);
        let errors: Vec<f64> = x
            .iter()
            .zip(y)
            .map(|(row, t)| (tree.predict_row(row) - t).abs())
            .collect();
        let max_err = errors.iter().copied().fold(0.0, f64::max);
        if max_err == 0.0 {
            model.estimators.push(tree);
            model.estimator_weights.push(1.0);
            break;
        }
        let losses: Vec<f64> = errors.iter().map(|e| loss.apply(e / max_err)).collect();
        match reweight(&weights, &losses, learning_rate) {
            None => {
                if model.estimators.is_empty() {
                    model.estimators.push(tree);
                    model.estimator_weights.push(1.0);
                }
                break;
            }
            Some(step) => {
                model.estimators.push(tree);
                model.estimator_weights.push(step.estimator_weight);
                if round + 1 < n_estimators {
                    weights = step.weights;
                }
            }
        }
    }
    Ok(model)
}
