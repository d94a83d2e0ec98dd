//! Independent reference implementations shared by the integration and
//! acceptance targets.

#![allow(dead_code)]

use cobb_core::regressors::mlp::{loss_and_gradient, MlpWeights};
use cobb_core::regressors::tree::Criterion;
use cobb_core::rng::SplitMix64;

pub fn random_matrix(rng: &mut SplitMix64, n: usize, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.uniform(lo, hi)).collect())
        .collect()
}

/// Small integer grid values so that ties and duplicates occur often.
pub fn random_grid_matrix(rng: &mut SplitMix64, n: usize, d: usize, levels: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.below(levels) as f64).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Exhaustive tree builder

/// Instance `i` of the oracle suite: n <= 12, d <= 3, alternating between
/// continuous and heavily tied inputs.
pub fn tree_instance(rng: &mut SplitMix64, i: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = 2 + rng.below(11);
    let d = 1 + rng.below(3);
    let x = if i % 2 == 0 {
        random_matrix(rng, n, d, -5.0, 5.0)
    } else {
        random_grid_matrix(rng, n, d, 4)
    };
    let y = if i % 3 == 0 {
        (0..n).map(|_| rng.below(4) as f64).collect()
    } else {
        (0..n).map(|_| rng.uniform(0.0, 60.0)).collect()
    };
    (x, y)
}

fn impurity(v: &[f64], criterion: Criterion) -> f64 {
    let n = v.len() as f64;
    match criterion {
        Criterion::Mse => {
            let m = v.iter().sum::<f64>() / n;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
        }
        Criterion::Mae => {
            let med = median(v);
            v.iter().map(|x| (x - med).abs()).sum::<f64>() / n
        }
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Leaf assignment and prediction for every training row, built by trying
/// every (feature, sorted position) and recomputing child impurities from
/// scratch.
pub struct BruteTree {
    pub leaf_of_row: Vec<usize>,
    pub prediction: Vec<f64>,
}

pub fn brute_tree(x: &[Vec<f64>], y: &[f64], criterion: Criterion, max_depth: Option<usize>) -> BruteTree {
    let mut out = BruteTree {
        leaf_of_row: vec![usize::MAX; y.len()],
        prediction: vec![f64::NAN; y.len()],
    };
    let mut next_leaf = 0;
    let all: Vec<usize> = (0..y.len()).collect();
    brute_grow(x, y, all, 0, criterion, max_depth, &mut out, &mut next_leaf);
    out
}

#[allow(clippy::too_many_arguments)]
fn brute_grow(
    x: &[Vec<f64>],
    y: &[f64],
    rows: Vec<usize>,
    depth: usize,
    criterion: Criterion,
    max_depth: Option<usize>,
    out: &mut BruteTree,
    next_leaf: &mut usize,
) {
    let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
    let make_leaf = |out: &mut BruteTree, next_leaf: &mut usize| {
        let v = match criterion {
            Criterion::Mse => mean(&ys),
            Criterion::Mae => median(&ys),
        };
        for &i in &rows {
            out.leaf_of_row[i] = *next_leaf;
            out.prediction[i] = v;
        }
        *next_leaf += 1;
    };
    if max_depth.is_some_and(|m| depth >= m) || rows.len() < 2 {
        return make_leaf(out, next_leaf);
    }
    let parent = impurity(&ys, criterion);
    if parent <= 0.0 {
        return make_leaf(out, next_leaf);
    }
    let tol = 1e-10 * parent;
    let d = x[0].len();
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    for f in 0..d {
        let mut order = rows.clone();
        order.sort_by(|&a, &b| x[a][f].partial_cmp(&x[b][f]).unwrap().then(a.cmp(&b)));
        for p in 1..order.len() {
            if x[order[p - 1]][f] == x[order[p]][f] {
                continue;
            }
            let l: Vec<f64> = order[..p].iter().map(|&i| y[i]).collect();
            let r: Vec<f64> = order[p..].iter().map(|&i| y[i]).collect();
            let cost = (l.len() as f64 * impurity(&l, criterion) + r.len() as f64 * impurity(&r, criterion))
                / order.len() as f64;
            let gain = parent - cost;
            let bar = best.as_ref().map_or(tol, |b| b.0 + tol);
            if gain > bar {
                best = Some((gain, order[..p].to_vec(), order[p..].to_vec()));
            }
        }
    }
    match best {
        None => make_leaf(out, next_leaf),
        Some((_, l, r)) => {
            brute_grow(x, y, l, depth + 1, criterion, max_depth, out, next_leaf);
            brute_grow(x, y, r, depth + 1, criterion, max_depth, out, next_leaf);
        }
    }
}

/// True when two labelings induce the same partition of the rows.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    use std::collections::HashMap;
    let mut ab = HashMap::new();
    let mut ba = HashMap::new();
    a.iter()
        .zip(b)
        .all(|(p, q)| *ab.entry(*p).or_insert(*q) == *q && *ba.entry(*q).or_insert(*p) == *p)
}

// ---------------------------------------------------------------------------
// Dense linear algebra

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in (c + 1)..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = ((r + 1)..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Posterior-mean prediction of `y = b + w.x + noise` with priors
/// `b ~ N(0, sigma0_sq)`, `w ~ N(0, I)` and noise variance `noise`.
pub fn bayesian_linear_mean(x: &[Vec<f64>], y: &[f64], sigma0_sq: f64, noise: f64, query: &[f64]) -> f64 {
    let p = x[0].len() + 1;
    let phi: Vec<Vec<f64>> = x
        .iter()
        .map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect())
        .collect();
    let mut a = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (row, t) in phi.iter().zip(y) {
        for i in 0..p {
            rhs[i] += row[i] * t / noise;
            for j in 0..p {
                a[i][j] += row[i] * row[j] / noise;
            }
        }
    }
    a[0][0] += 1.0 / sigma0_sq;
    for (i, row) in a.iter_mut().enumerate().skip(1) {
        row[i] += 1.0;
    }
    let theta = gauss_solve(a, rhs);
    theta[0] + theta[1..].iter().zip(query).map(|(w, q)| w * q).sum::<f64>()
}

/// Ordinary least squares with intercept through the normal equations.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let p = x[0].len() + 1;
    let mut a = vec![vec![0.0; p]; p];
    let mut rhs = vec![0.0; p];
    for (r, t) in x.iter().zip(y) {
        let phi: Vec<f64> = std::iter::once(1.0).chain(r.iter().copied()).collect();
        for i in 0..p {
            rhs[i] += phi[i] * t;
            for j in 0..p {
                a[i][j] += phi[i] * phi[j];
            }
        }
    }
    let theta = gauss_solve(a, rhs);
    (theta[1..].to_vec(), theta[0])
}

// ---------------------------------------------------------------------------
// SVR reference optimizer

pub fn svr_primal(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, c: f64, eps: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(r, t)| {
            let f = b + r.iter().zip(w).map(|(a, v)| a * v).sum::<f64>();
            ((t - f).abs() - eps).max(0.0)
        })
        .sum();
    reg + c * loss
}

/// Projects `z` onto `{u in [0, c]^m : a.u = 0}` with `a` a vector of
/// `+-1`, by bisection on the multiplier.
fn project(z: &[f64], sign: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> (Vec<f64>, f64) {
        let u: Vec<f64> = z
            .iter()
            .zip(sign)
            .map(|(zi, s)| (zi - lam * s).clamp(0.0, c))
            .collect();
        let dot = u.iter().zip(sign).map(|(a, b)| a * b).sum();
        (u, dot)
    };
    let reach = z.iter().fold(c, |m, v| m.max(v.abs())) + c;
    let (mut lo, mut hi) = (-reach, reach);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid).1 > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi)).0
}

/// Best primal objective reached by accelerated projected gradient on the
/// split dual `(alpha, alpha*)`, with the intercept chosen by exhaustive
/// search over the loss knots.
pub fn svr_reference_objective(x: &[Vec<f64>], y: &[f64], c: f64, eps: f64, iters: usize) -> f64 {
    let n = y.len();
    let d = x[0].len();
    let k: Vec<Vec<f64>> = x
        .iter()
        .map(|a| x.iter().map(|b| a.iter().zip(b).map(|(u, v)| u * v).sum()).collect())
        .collect();
    let trace: f64 = (0..n).map(|i| k[i][i]).sum();
    let step = 1.0 / (2.0 * trace + 1e-12);
    let sign: Vec<f64> = (0..2 * n).map(|i| if i < n { 1.0 } else { -1.0 }).collect();
    let grad = |u: &[f64]| -> Vec<f64> {
        let beta: Vec<f64> = (0..n).map(|i| u[i] - u[n + i]).collect();
        let kb: Vec<f64> = (0..n).map(|i| (0..n).map(|j| k[i][j] * beta[j]).sum()).collect();
        (0..2 * n)
            .map(|i| if i < n { y[i] - kb[i] - eps } else { kb[i - n] - y[i - n] - eps })
            .collect()
    };
    let mut u = vec![0.0; 2 * n];
    let mut v = u.clone();
    let mut t = 1.0f64;
    for _ in 0..iters {
        let g = grad(&v);
        let z: Vec<f64> = v.iter().zip(&g).map(|(a, b)| a + step * b).collect();
        let un = project(&z, &sign, c);
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        v = un.iter().zip(&u).map(|(a, b)| a + (t - 1.0) / tn * (a - b)).collect();
        u = un;
        t = tn;
    }
    let mut w = vec![0.0; d];
    for i in 0..n {
        let b = u[i] - u[n + i];
        for f in 0..d {
            w[f] += b * x[i][f];
        }
    }
    let resid: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(r, t)| t - r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    resid
        .iter()
        .flat_map(|r| [r - eps, r + eps])
        .map(|b| svr_primal(x, y, &w, b, c, eps))
        .fold(f64::INFINITY, f64::min)
}

// ---------------------------------------------------------------------------
// MLP finite differences

/// `|analytic - numeric| / max(|analytic|, |numeric|)` over the whole
/// gradient vector, with central differences of step `h`.
pub fn mlp_gradient_error(w: &MlpWeights, x: &[Vec<f64>], y: &[f64], l2: f64, h: f64) -> f64 {
    let (_, g) = loss_and_gradient(w, x, y, l2);
    let flat = w.to_flat();
    let num: Vec<f64> = (0..flat.len())
        .map(|i| {
            let mut p = flat.clone();
            p[i] += h;
            let up = loss_and_gradient(&MlpWeights::from_flat(w.n_inputs, w.hidden, &p), x, y, l2).0;
            p[i] -= 2.0 * h;
            let down = loss_and_gradient(&MlpWeights::from_flat(w.n_inputs, w.hidden, &p), x, y, l2).0;
            (up - down) / (2.0 * h)
        })
        .collect();
    let diff: f64 = g.iter().zip(&num).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = num.iter().map(|v| v * v).sum::<f64>().sqrt().max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
    diff / scale.max(1e-8)
}

// ---------------------------------------------------------------------------
// Instance generators for the property suites

/// Tiny SVR problem: n <= 6, d <= 2, with `C` and `epsilon`.
pub fn svr_instance(rng: &mut SplitMix64) -> (Vec<Vec<f64>>, Vec<f64>, f64, f64) {
    let n = 2 + rng.below(5);
    let d = 1 + rng.below(2);
    let x = random_matrix(rng, n, d, -2.0, 2.0);
    let y = (0..n).map(|_| rng.uniform(-3.0, 3.0)).collect();
    let c = [0.1, 1.0, 10.0][rng.below(3)];
    let eps = rng.uniform(0.0, 0.5);
    (x, y, c, eps)
}

/// GP problem with fixed hyperparameters and a query point.
pub fn gp_instance(rng: &mut SplitMix64) -> (Vec<Vec<f64>>, Vec<f64>, f64, f64, Vec<f64>) {
    let n = 1 + rng.below(10);
    let d = 1 + rng.below(4);
    let x = random_matrix(rng, n, d, -2.0, 2.0);
    let y = (0..n).map(|_| rng.uniform(-5.0, 5.0)).collect();
    let s0 = 10f64.powf(rng.uniform(-2.0, 2.0));
    let noise = 10f64.powf(rng.uniform(-2.0, 1.0));
    let q = (0..d).map(|_| rng.uniform(-3.0, 3.0)).collect();
    (x, y, s0, noise, q)
}

/// Random network with 3 hidden units on n = 4, d = 2, and an l2 weight.
pub fn mlp_instance(rng: &mut SplitMix64) -> (MlpWeights, Vec<Vec<f64>>, Vec<f64>, f64) {
    let mut w = MlpWeights::glorot(2, 3, rng);
    w.b2 = rng.uniform(-1.0, 1.0);
    let x = random_matrix(rng, 4, 2, -2.0, 2.0);
    let y = (0..4).map(|_| rng.uniform(-3.0, 3.0)).collect();
    let l2 = [0.0, 1e-4, 0.5][rng.below(3)];
    (w, x, y, l2)
}

// ---------------------------------------------------------------------------
// Feature statistics properties

/// Checks the shift (`x + b`), scale (`a x`, `a > 0`) and bound properties
/// of the six statistics on one signal.
pub fn stats_properties(x: &[f64], b: f64, a: f64) -> Result<(), String> {
    use cobb_core::features::signal_stats;
    let s = signal_stats(x).map_err(|e| e.to_string())?.to_array();
    let shifted: Vec<f64> = x.iter().map(|v| v + b).collect();
    let t = signal_stats(&shifted).map_err(|e| e.to_string())?.to_array();
    let scaled: Vec<f64> = x.iter().map(|v| a * v).collect();
    let u = signal_stats(&scaled).map_err(|e| e.to_string())?.to_array();

    let mag = x.iter().fold(1.0f64, |m, v| m.max(v.abs())) + b.abs();
    let abs_tol = 1e-12 * mag;
    for k in [0, 4, 5] {
        if (t[k] - s[k]).abs() > abs_tol {
            return Err(format!("shift changed f{}: {} vs {}", k + 1, s[k], t[k]));
        }
    }
    if (t[3] - (s[3] + b)).abs() > abs_tol {
        return Err(format!("shift moved f4 by {} instead of {b}", t[3] - s[3]));
    }
    for k in [0, 2, 3, 4, 5] {
        let want = a * s[k];
        if (u[k] - want).abs() > 1e-9 * want.abs().max(1e-300) && (u[k] - want).abs() > 1e-12 * a * mag {
            return Err(format!("scale: f{} = {} expected {want}", k + 1, u[k]));
        }
    }
    if s[2] < s[3].abs() || s[5] < s[0] || s[0] < 0.0 {
        return Err(format!("bounds violated: {s:?}"));
    }
    Ok(())
}

/// Random signal of length 1..=200 with values spread over several scales.
pub fn random_signal(rng: &mut SplitMix64) -> Vec<f64> {
    let n = 1 + rng.below(200);
    let scale = 10f64.powf(rng.uniform(-3.0, 3.0));
    let offset = rng.uniform(-100.0, 100.0);
    (0..n).map(|_| offset + scale * rng.standard_normal()).collect()
}

// ---------------------------------------------------------------------------
// Scripted cross-validation loop

/// Per-fold MAEs recomputed with a hand-written loop: folds from
/// `make_folds`, scaler statistics and MAE computed here.
pub fn scripted_cv(
    fm: &cobb_core::features::FeatureMatrix,
    spec: &cobb_core::regressors::RegressorSpec,
    k: usize,
    seed: u64,
) -> Vec<f64> {
    use cobb_core::rng::derive_seed;
    let folds = cobb_core::evaluation::make_folds(fm.n(), k, seed).unwrap();
    let d = fm.width();
    let mut out = Vec::new();
    for f in 0..k {
        let train: Vec<usize> = (0..fm.n()).filter(|&i| folds.fold_of[i] != f).collect();
        let test: Vec<usize> = (0..fm.n()).filter(|&i| folds.fold_of[i] == f).collect();
        let mut mean = vec![0.0; d];
        let mut sd = vec![0.0; d];
        for j in 0..d {
            let col: Vec<f64> = train.iter().map(|&i| fm.rows[i][j]).collect();
            mean[j] = col.iter().sum::<f64>() / col.len() as f64;
            let v = col.iter().map(|c| (c - mean[j]) * (c - mean[j])).sum::<f64>() / col.len() as f64;
            sd[j] = if v.sqrt() < 1e-12 { 1.0 } else { v.sqrt() };
        }
        let scale = |i: usize| -> Vec<f64> { (0..d).map(|j| (fm.rows[i][j] - mean[j]) / sd[j]).collect() };
        let xt: Vec<Vec<f64>> = train.iter().map(|&i| scale(i)).collect();
        let yt: Vec<f64> = train.iter().map(|&i| fm.targets[i]).collect();
        let model_seed = derive_seed(derive_seed(seed, spec.algorithm().roster_index() as u64), f as u64);
        let model = cobb_core::regressors::fit(spec, &xt, &yt, model_seed).unwrap();
        let err: f64 = test
            .iter()
            .map(|&i| (model.predict_row(&scale(i)) - fm.targets[i]).abs())
            .sum();
        out.push(err / test.len() as f64);
    }
    out
}

pub fn matrix(rows: Vec<Vec<f64>>, targets: Vec<f64>) -> cobb_core::features::FeatureMatrix {
    let names = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
    let ids = (0..rows.len()).map(|i| format!("P{i:03}")).collect();
    cobb_core::features::FeatureMatrix::new(names, rows, targets, ids).unwrap()
}
