//! Bootstrap-aggregated trees: random forests and bagging.

use serde::{Deserialize, Serialize};

use super::tree::{Tree, TreeOptions};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

/// Members predict independently; the ensemble returns their mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
}

impl TreeEnsemble {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Member `i` draws its bootstrap (when enabled) and its per-split feature
/// subsets from a stream seeded with `derive_seed(seed, i)`.
pub fn fit_ensemble(
    x: &[Vec<f64>],
    y: &[f64],
    n_estimators: usize,
    opts: &TreeOptions,
    bootstrap: bool,
    seed: u64,
) -> Result<TreeEnsemble> {
    super::tree::check_xy(x, y)?;
    if y.is_empty() {
        return Err(Error::InvalidInput("cannot fit on no samples".into()));
    }
    let n = y.len();
    let trees = (0..n_estimators)
        .map(|i| {
            let mut rng = SplitMix64::new(derive_seed(seed, i as u64));
            let idx = if bootstrap {
                rng.bootstrap(n)
            } else {
                (0..n).collect()
            };
            Tree::fit_indices(x, y, &idx, opts, &mut rng)
        })
        .collect();
    Ok(TreeEnsemble { trees })
}

/// `floor(log2 d)`, at least 1.
pub fn log2_features(d: usize) -> usize {
    if d <= 1 {
        1
    } else {
        (usize::BITS - 1 - d.leading_zeros()) as usize
    }
}
