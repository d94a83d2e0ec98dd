//! One-hidden-layer perceptron with logistic units and a linear output,
//! trained full-batch with Adam.
//!
//! Loss: `1/(2n) sum (f(x_i) - y_i)^2 + l2 (|W1|^2 + |W2|^2) / (2n)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Network parameters. `w1` is input-major: `w1[f * hidden + h]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpWeights {
    pub n_inputs: usize,
    pub hidden: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpWeights {
    pub fn zeros(n_inputs: usize, hidden: usize) -> Self {
        Self {
            n_inputs,
            hidden,
            w1: vec![0.0; n_inputs * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden],
            b2: 0.0,
        }
    }

    /// Uniform in `+-sqrt(6 / (fan_in + fan_out))` per layer, biases
    /// included. Draw order: w1, b1, w2, b2.
    pub fn glorot(n_inputs: usize, hidden: usize, rng: &mut SplitMix64) -> Self {
        let mut w = Self::zeros(n_inputs, hidden);
        let b = (6.0 / (n_inputs + hidden) as f64).sqrt();
        w.w1.iter_mut().for_each(|v| *v = rng.uniform(-b, b));
        w.b1.iter_mut().for_each(|v| *v = rng.uniform(-b, b));
        let b = (6.0 / (hidden + 1) as f64).sqrt();
        w.w2.iter_mut().for_each(|v| *v = rng.uniform(-b, b));
        w.b2 = rng.uniform(-b, b);
        w
    }

    fn hidden_activations(&self, row: &[f64], out: &mut [f64]) {
        for (h, a) in out.iter_mut().enumerate() {
            let mut z = self.b1[h];
            for (f, x) in row.iter().enumerate() {
                z += x * self.w1[f * self.hidden + h];
            }
            *a = logistic(z);
        }
    }

    pub fn forward(&self, row: &[f64]) -> f64 {
        let mut a = vec![0.0; self.hidden];
        self.hidden_activations(row, &mut a);
        self.b2 + a.iter().zip(&self.w2).map(|(u, v)| u * v).sum::<f64>()
    }

    /// Flat view in the order w1, b1, w2, b2.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.w1.len() + 2 * self.hidden + 1);
        v.extend(&self.w1);
        v.extend(&self.b1);
        v.extend(&self.w2);
        v.push(self.b2);
        v
    }

    pub fn from_flat(n_inputs: usize, hidden: usize, flat: &[f64]) -> Self {
        let a = n_inputs * hidden;
        Self {
            n_inputs,
            hidden,
            w1: flat[..a].to_vec(),
            b1: flat[a..a + hidden].to_vec(),
            w2: flat[a + hidden..a + 2 * hidden].to_vec(),
            b2: flat[a + 2 * hidden],
        }
    }
}

/// Training loss and its gradient, flattened like [`MlpWeights::to_flat`].
pub fn loss_and_gradient(w: &MlpWeights, x: &[Vec<f64>], y: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let n = y.len() as f64;
    let hidden = w.hidden;
    let mut g = MlpWeights::zeros(w.n_inputs, hidden);
    let mut a = vec![0.0; hidden];
    let mut sq = 0.0;
    for (row, t) in x.iter().zip(y) {
        w.hidden_activations(row, &mut a);
        let out = w.b2 + a.iter().zip(&w.w2).map(|(u, v)| u * v).sum::<f64>();
        let err = out - t;
        sq += err * err;
        let delta = err / n;
        g.b2 += delta;
        for h in 0..hidden {
            g.w2[h] += delta * a[h];
            let dh = delta * w.w2[h] * a[h] * (1.0 - a[h]);
            g.b1[h] += dh;
            for (f, xv) in row.iter().enumerate() {
                g.w1[f * hidden + h] += dh * xv;
            }
        }
    }
    let norm_sq: f64 = w.w1.iter().chain(&w.w2).map(|v| v * v).sum();
    for (gv, wv) in g.w1.iter_mut().zip(&w.w1).chain(g.w2.iter_mut().zip(&w.w2)) {
        *gv += l2 * wv / n;
    }
    let loss = sq / (2.0 * n) + l2 * norm_sq / (2.0 * n);
    (loss, g.to_flat())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamSettings {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub weights: MlpWeights,
    pub epochs: usize,
    pub final_loss: f64,
    /// True when training stopped on the no-improvement rule.
    pub stopped_early: bool,
}

impl MlpModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        self.weights.forward(row)
    }
}

pub struct MlpTraining {
    pub hidden: usize,
    pub adam: AdamSettings,
    pub max_iter: usize,
    pub n_iter_no_change: usize,
    pub improvement_tol: f64,
    pub l2: f64,
}

pub fn fit_mlp(x: &[Vec<f64>], y: &[f64], cfg: &MlpTraining, seed: u64) -> Result<MlpModel> {
    super::tree::check_xy(x, y)?;
    if y.is_empty() {
        return Err(Error::InvalidInput("cannot fit on no samples".into()));
    }
    let d = x[0].len();
    let mut rng = SplitMix64::new(seed);
    let weights = MlpWeights::glorot(d, cfg.hidden, &mut rng);
    let mut p = weights.to_flat();
    let mut m = vec![0.0; p.len()];
    let mut v = vec![0.0; p.len()];
    let AdamSettings {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = cfg.adam;

    let mut best = f64::INFINITY;
    let mut stale = 0;
    let mut epochs = 0;
    let mut stopped_early = false;
    let mut last_loss = f64::NAN;
    for t in 1..=cfg.max_iter {
        let w = MlpWeights::from_flat(d, cfg.hidden, &p);
        let (loss, grad) = loss_and_gradient(&w, x, y, cfg.l2);
        if !loss.is_finite() {
            return Err(Error::Fit(format!("mlp loss diverged at epoch {t}")));
        }
        let step = learning_rate * (1.0 - beta2.powi(t as i32)).sqrt() / (1.0 - beta1.powi(t as i32));
        for i in 0..p.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            p[i] -= step * m[i] / (v[i].sqrt() + epsilon);
        }
        epochs = t;
        last_loss = loss;

        if loss > best - cfg.improvement_tol {
            stale += 1;
        } else {
            stale = 0;
        }
        if loss < best {
            best = loss;
        }
        if stale >= cfg.n_iter_no_change {
            stopped_early = true;
            break;
        }
    }

    Ok(MlpModel {
        weights: MlpWeights::from_flat(d, cfg.hidden, &p),
        epochs,
        final_loss: last_loss,
        stopped_early,
    })
}
