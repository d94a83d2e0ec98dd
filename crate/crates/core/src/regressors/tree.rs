//! CART-style regression trees grown greedily by impurity decrease.
//!
//! Candidate thresholds sit at midpoints between consecutive distinct sorted
//! values of a feature. A candidate only replaces the incumbent when its gain
//! is larger by more than [`gain_tolerance`], so exact ties resolve to the
//! lowest feature index and then the lowest sorted split position. Since the
//! choice depends only on the ordering of each column, any strictly
//! increasing transform of a column leaves the chosen partitions unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    /// Population variance; leaves predict the mean.
    #[default]
    Mse,
    /// Mean absolute deviation around the median; leaves predict the median.
    Mae,
}

/// Impurity of a node holding `targets`.
pub fn impurity(targets: &[f64], criterion: Criterion) -> Result<f64> {
    if targets.is_empty() {
        return Err(Error::InvalidInput("impurity of an empty node".into()));
    }
    Ok(node_impurity(targets, criterion))
}

pub(crate) fn node_impurity(targets: &[f64], criterion: Criterion) -> f64 {
    match criterion {
        Criterion::Mse => variance(targets),
        Criterion::Mae => {
            let mut sorted = targets.to_vec();
            sorted.sort_by(f64::total_cmp);
            mad_sorted(&sorted)
        }
    }
}

fn variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
}

/// Median of an ascending slice; mean of the two middle values for even length.
pub(crate) fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    median_sorted(&s)
}

fn mad_sorted(sorted: &[f64]) -> f64 {
    let med = median_sorted(sorted);
    sorted.iter().map(|x| (x - med).abs()).sum::<f64>() / sorted.len() as f64
}

/// Minimum gain margin for a split to count as positive or as strictly
/// better than another candidate, relative to the parent impurity.
pub fn gain_tolerance(parent_impurity: f64) -> f64 {
    1e-10 * parent_impurity
}

/// Midpoint threshold that still separates `lo` (left) from `hi` (right).
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = lo + (hi - lo) / 2.0;
    if t >= hi {
        lo
    } else {
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
    /// Number of samples sent left, i.e. the split position in sorted order.
    pub n_left: usize,
}

/// Best single split of `(x, y)` over all features, or `None` when no
/// candidate has positive gain.
pub fn best_split(x: &[Vec<f64>], y: &[f64], criterion: Criterion) -> Result<Option<Split>> {
    let d = check_xy(x, y)?;
    if y.len() < 2 {
        return Err(Error::InvalidInput("best_split needs at least 2 samples".into()));
    }
    let idx: Vec<usize> = (0..y.len()).collect();
    let features: Vec<usize> = (0..d).collect();
    Ok(find_split(x, y, &idx, &features, criterion).map(|(s, _)| s))
}

pub(crate) fn check_xy(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    let d = x.first().map_or(0, Vec::len);
    for row in x {
        if row.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: row.len(),
            });
        }
    }
    Ok(d)
}

/// Searches `features` (ascending) over the samples `idx`. Returns the split
/// and the sample indices sorted along the winning feature.
fn find_split(
    x: &[Vec<f64>],
    y: &[f64],
    idx: &[usize],
    features: &[usize],
    criterion: Criterion,
) -> Option<(Split, Vec<usize>)> {
    let m = idx.len();
    if m < 2 {
        return None;
    }
    let node_y: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let parent = node_impurity(&node_y, criterion);
    let tol = gain_tolerance(parent);
    if parent <= 0.0 {
        return None;
    }

    let mut best: Option<(Split, Vec<usize>)> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
        let child_cost = match criterion {
            Criterion::Mse => mse_child_costs(&ys),
            Criterion::Mae => mae_child_costs(&ys),
        };
        for p in 1..m {
            let lo = x[order[p - 1]][f];
            let hi = x[order[p]][f];
            if lo >= hi {
                continue;
            }
            let gain = parent - child_cost[p];
            let bar = best.as_ref().map_or(tol, |(b, _)| b.gain + tol);
            if gain > bar {
                best = Some((
                    Split {
                        feature: f,
                        threshold: midpoint(lo, hi),
                        gain,
                        n_left: p,
                    },
                    order.clone(),
                ));
            }
        }
    }
    best
}

/// `cost[p]` = weighted child impurity when the first `p` sorted samples go
/// left, for `p` in `1..m`. Running sums over targets centred on their mean.
fn mse_child_costs(ys: &[f64]) -> Vec<f64> {
    let m = ys.len();
    let mean = ys.iter().sum::<f64>() / m as f64;
    let c: Vec<f64> = ys.iter().map(|v| v - mean).collect();
    let total: f64 = c.iter().sum();
    let total_sq: f64 = c.iter().map(|v| v * v).sum();
    let mut cost = vec![0.0; m];
    let (mut s, mut sq) = (0.0, 0.0);
    for p in 1..m {
        s += c[p - 1];
        sq += c[p - 1] * c[p - 1];
        let nl = p as f64;
        let nr = (m - p) as f64;
        let sse_l = (sq - s * s / nl).max(0.0);
        let sr = total - s;
        let sse_r = ((total_sq - sq) - sr * sr / nr).max(0.0);
        cost[p] = (sse_l + sse_r) / m as f64;
    }
    cost
}

fn mae_child_costs(ys: &[f64]) -> Vec<f64> {
    let m = ys.len();
    let mut left: Vec<f64> = Vec::with_capacity(m);
    let mut right: Vec<f64> = ys.to_vec();
    right.sort_by(f64::total_cmp);
    let mut cost = vec![0.0; m];
    for p in 1..m {
        let v = ys[p - 1];
        let at = left.partition_point(|u| u.total_cmp(&v).is_lt());
        left.insert(at, v);
        let at = right.partition_point(|u| u.total_cmp(&v).is_lt());
        right.remove(at);
        cost[p] = (p as f64 * mad_sorted(&left) + (m - p) as f64 * mad_sorted(&right)) / m as f64;
    }
    cost
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Arena-stored tree, root at index 0. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeOptions {
    /// `None` grows until leaves are pure or hold one sample.
    pub max_depth: Option<usize>,
    pub criterion: Criterion,
    /// Features examined per split. `None` examines all of them; otherwise a
    /// fresh uniform subset is drawn at every split.
    pub max_features: Option<usize>,
}

impl Default for TreeOptions {
    fn default() -> Self {
        Self {
            max_depth: Some(4),
            criterion: Criterion::Mse,
            max_features: None,
        }
    }
}

impl Tree {
    /// Grows a tree on all rows.
    pub fn fit(x: &[Vec<f64>], y: &[f64], opts: &TreeOptions) -> Result<Tree> {
        check_xy(x, y)?;
        if y.is_empty() {
            return Err(Error::InvalidInput("cannot fit a tree on no samples".into()));
        }
        let idx: Vec<usize> = (0..y.len()).collect();
        let mut rng = SplitMix64::new(0);
        Ok(Self::fit_indices(x, y, &idx, opts, &mut rng))
    }

    /// Grows a tree on the rows listed in `idx` (repeats allowed). `rng` is
    /// only consumed when `opts.max_features` restricts the search.
    pub(crate) fn fit_indices(
        x: &[Vec<f64>],
        y: &[f64],
        idx: &[usize],
        opts: &TreeOptions,
        rng: &mut SplitMix64,
    ) -> Tree {
        let d = x.first().map_or(0, Vec::len);
        let mut tree = Tree { nodes: Vec::new() };
        tree.grow(x, y, idx.to_vec(), 0, d, opts, rng);
        tree
    }

    #[allow(clippy::too_many_arguments)]
    fn grow(
        &mut self,
        x: &[Vec<f64>],
        y: &[f64],
        idx: Vec<usize>,
        depth: usize,
        d: usize,
        opts: &TreeOptions,
        rng: &mut SplitMix64,
    ) -> usize {
        let id = self.nodes.len();
        let targets: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
        self.nodes.push(Node::Leaf {
            value: leaf_value(&targets, opts.criterion),
        });

        let depth_ok = opts.max_depth.is_none_or(|m| depth < m);
        if !depth_ok || idx.len() < 2 {
            return id;
        }
        let features = match opts.max_features {
            Some(k) if k < d => sample_features(d, k.max(1), rng),
            _ => (0..d).collect(),
        };
        let Some((split, order)) = find_split(x, y, &idx, &features, opts.criterion) else {
            return id;
        };
        let (l, r) = order.split_at(split.n_left);
        let left = self.grow(x, y, l.to_vec(), depth + 1, d, opts, rng);
        let right = self.grow(x, y, r.to_vec(), depth + 1, d, opts, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }

    /// Index of the leaf reached by `row`.
    pub fn leaf_of(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(row)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_of returns a leaf"),
        }
    }

    pub(crate) fn set_leaf_value(&mut self, leaf: usize, v: f64) {
        if let Node::Leaf { value } = &mut self.nodes[leaf] {
            *value = v;
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

pub(crate) fn leaf_value(targets: &[f64], criterion: Criterion) -> f64 {
    match criterion {
        Criterion::Mse => targets.iter().sum::<f64>() / targets.len() as f64,
        Criterion::Mae => median(targets),
    }
}

/// `k` distinct features out of `0..d` by partial Fisher-Yates, ascending.
fn sample_features(d: usize, k: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut all: Vec<usize> = (0..d).collect();
    for i in 0..k {
        let j = i + rng.below(d - i);
        all.swap(i, j);
    }
    let mut chosen = all[..k].to_vec();
    chosen.sort_unstable();
    chosen
}
