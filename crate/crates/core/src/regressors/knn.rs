use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stored training set; predictions average the targets of the `k` nearest
/// rows by Euclidean distance, ties going to the lower training index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl KnnModel {
    pub fn fit(x: &[Vec<f64>], y: &[f64], k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("knn needs k >= 1".into()));
        }
        if y.len() < k {
            return Err(Error::Fit(format!(
                "knn with k = {k} needs at least {k} training rows, got {}",
                y.len()
            )));
        }
        Ok(Self {
            k,
            x: x.to_vec(),
            y: y.to_vec(),
        })
    }

    /// Training indices of the `k` nearest rows, nearest first.
    pub fn neighbors(&self, row: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let s: f64 = r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                (s, i)
            })
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d.into_iter().take(self.k).map(|(_, i)| i).collect()
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let nb = self.neighbors(row);
        nb.iter().map(|&i| self.y[i]).sum::<f64>() / nb.len() as f64
    }
}
