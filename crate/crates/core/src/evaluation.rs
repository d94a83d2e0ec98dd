//! Mean absolute error under seeded k-fold cross-validation, grid search and
//! the multi-model benchmark.
//!
//! Seeds: model `a` (roster position) in fold `f` of a run seeded `s` is fit
//! with `derive_seed(derive_seed(s, a), f)`, so every (model, fold) job is
//! independent and parallel runs reproduce sequential ones bit for bit.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{fit_scaler_on, FeatureMatrix, RowAccess, ScalerParams};
use crate::regressors::{self, Algorithm, RegressorSpec};
use crate::rng::{derive_seed, SplitMix64};
use crate::ARTIFACT_VERSION;

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_K: usize = 10;

/// `sum |p_i - t_i| / n`.
pub fn mae(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::DimensionMismatch {
            expected: truths.len(),
            got: predictions.len(),
        });
    }
    if truths.is_empty() {
        return Err(Error::InvalidInput("mae of empty vectors".into()));
    }
    Ok(predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t).abs())
        .sum::<f64>()
        / truths.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    /// Fold id of every sample.
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.fold_of[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.k];
        for &f in &self.fold_of {
            s[f] += 1;
        }
        s
    }
}

/// Shuffles `0..n` with a seeded Fisher-Yates pass, then deals the
/// permutation into `k` contiguous blocks, the `n mod k` larger blocks first.
pub fn make_folds(n: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be >= 2, got {k}")));
    }
    if k > n {
        return Err(Error::InvalidConfig(format!(
            "k = {k} exceeds the number of samples {n}"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut perm);
    let (base, extra) = (n / k, n % k);
    let mut fold_of = vec![0; n];
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        for &i in &perm[at..at + size] {
            fold_of[i] = f;
        }
        at += size;
    }
    Ok(FoldAssignment { k, seed, fold_of })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalerMode {
    /// Scaler fit on each fold's training rows only.
    #[default]
    PerFold,
    /// One scaler fit on all rows before splitting.
    Global,
}

impl ScalerMode {
    pub fn label(self) -> &'static str {
        match self {
            ScalerMode::PerFold => "per_fold",
            ScalerMode::Global => "global",
        }
    }
}

/// Scaler used for `fold`. In per-fold mode only that fold's training rows
/// are read.
pub fn fold_scaler<R: RowAccess + ?Sized>(
    rows: &R,
    folds: &FoldAssignment,
    fold: usize,
    mode: ScalerMode,
) -> Result<ScalerParams> {
    match mode {
        ScalerMode::PerFold => fit_scaler_on(rows, &folds.train_indices(fold)),
        ScalerMode::Global => {
            let all: Vec<usize> = (0..rows.n_rows()).collect();
            fit_scaler_on(rows, &all)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model_name: String,
    pub spec: RegressorSpec,
    pub seed: u64,
    pub scaler_mode: ScalerMode,
    pub k: usize,
    pub per_fold_mae: Vec<f64>,
    pub mean_mae: f64,
    /// Population standard deviation over folds.
    pub std_mae: f64,
    /// Folds whose fit hit an iteration cap.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unconverged_folds: Vec<usize>,
}

impl CvReport {
    fn from_folds(spec: &RegressorSpec, seed: u64, mode: ScalerMode, folds: Vec<FoldOutcome>) -> Self {
        let k = folds.len();
        let per_fold_mae: Vec<f64> = folds.iter().map(|f| f.mae).collect();
        let mean_mae = per_fold_mae.iter().sum::<f64>() / k as f64;
        let std_mae = (per_fold_mae
            .iter()
            .map(|m| (m - mean_mae) * (m - mean_mae))
            .sum::<f64>()
            / k as f64)
            .sqrt();
        CvReport {
            model_name: spec.name().to_string(),
            spec: spec.clone(),
            seed,
            scaler_mode: mode,
            k,
            per_fold_mae,
            mean_mae,
            std_mae,
            unconverged_folds: folds
                .iter()
                .enumerate()
                .filter(|(_, f)| !f.converged)
                .map(|(i, _)| i)
                .collect(),
        }
    }
}

struct FoldOutcome {
    mae: f64,
    converged: bool,
}

/// Seed for fitting `algorithm` in `fold` of a run seeded `seed`.
pub fn fold_model_seed(seed: u64, algorithm: Algorithm, fold: usize) -> u64 {
    derive_seed(derive_seed(seed, algorithm.roster_index() as u64), fold as u64)
}

fn run_fold(
    fm: &FeatureMatrix,
    spec: &RegressorSpec,
    folds: &FoldAssignment,
    fold: usize,
    mode: ScalerMode,
    global: Option<&ScalerParams>,
) -> Result<FoldOutcome> {
    let wrap = |e: Error| Error::Fold {
        fold,
        source: Box::new(e),
    };
    let scaler = match global {
        Some(s) => s.clone(),
        None => fold_scaler(fm, folds, fold, mode).map_err(wrap)?,
    };
    let train = folds.train_indices(fold);
    let test = folds.test_indices(fold);
    let scale = |idx: &[usize]| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let x = idx
            .iter()
            .map(|&i| scaler.transform_row(&fm.rows[i]))
            .collect::<Result<Vec<_>>>()?;
        Ok((x, idx.iter().map(|&i| fm.targets[i]).collect()))
    };
    let (x_train, y_train) = scale(&train).map_err(wrap)?;
    let (x_test, y_test) = scale(&test).map_err(wrap)?;
    let seed = fold_model_seed(folds.seed, spec.algorithm(), fold);
    let model = regressors::fit(spec, &x_train, &y_train, seed).map_err(wrap)?;
    let pred = model.predict(&x_test).map_err(wrap)?;
    Ok(FoldOutcome {
        mae: mae(&pred, &y_test).map_err(wrap)?,
        converged: model.converged(),
    })
}

/// Threads for fold and model evaluation; 0 runs sequentially on the
/// calling thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Parallelism(pub usize);

impl Parallelism {
    pub const SEQUENTIAL: Parallelism = Parallelism(0);

    fn run<T: Send>(self, jobs: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
        if self.0 == 0 {
            return Ok((0..jobs).map(f).collect());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.0)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
        Ok(pool.install(|| (0..jobs).into_par_iter().map(f).collect()))
    }
}

pub fn cross_validate(
    fm: &FeatureMatrix,
    spec: &RegressorSpec,
    k: usize,
    seed: u64,
    mode: ScalerMode,
) -> Result<CvReport> {
    cross_validate_with(fm, spec, k, seed, mode, Parallelism::SEQUENTIAL)
}

pub fn cross_validate_with(
    fm: &FeatureMatrix,
    spec: &RegressorSpec,
    k: usize,
    seed: u64,
    mode: ScalerMode,
    par: Parallelism,
) -> Result<CvReport> {
    let mut reports = evaluate_specs(fm, std::slice::from_ref(spec), k, seed, mode, par)?;
    reports.pop().expect("one spec in, one report out")
}

/// One CV result per spec, all on the same folds. Outer errors are about the
/// run as a whole; inner ones belong to a single spec.
fn evaluate_specs(
    fm: &FeatureMatrix,
    specs: &[RegressorSpec],
    k: usize,
    seed: u64,
    mode: ScalerMode,
    par: Parallelism,
) -> Result<Vec<Result<CvReport>>> {
    for s in specs {
        s.validate()?;
    }
    let folds = make_folds(fm.n(), k, seed)?;
    let global = match mode {
        ScalerMode::Global => Some(fold_scaler(fm, &folds, 0, mode)?),
        ScalerMode::PerFold => None,
    };
    let outcomes = par.run(specs.len() * k, |job| {
        let (s, f) = (job / k, job % k);
        run_fold(fm, &specs[s], &folds, f, mode, global.as_ref())
    })?;
    let mut it = outcomes.into_iter();
    Ok(specs
        .iter()
        .map(|spec| {
            let folds: Vec<Result<FoldOutcome>> = it.by_ref().take(k).collect();
            let folds = folds.into_iter().collect::<Result<Vec<_>>>()?;
            Ok(CvReport::from_folds(spec, seed, mode, folds))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub spec: RegressorSpec,
    /// `None` when this combination failed; see `error`.
    pub mean_mae: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_spec: RegressorSpec,
    pub best_mean_mae: f64,
    pub best_report: CvReport,
    /// Every combination in enumeration order.
    pub table: Vec<GridEntry>,
}

/// Hyperparameter grid: an algorithm and value lists per parameter.
/// Expansion is the cartesian product with the first declared key varying
/// slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

impl ParamGrid {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn expand(&self) -> Result<Vec<RegressorSpec>> {
        let mut combos: Vec<serde_json::Map<String, serde_json::Value>> = vec![Default::default()];
        for (key, values) in &self.params {
            let values = match values {
                serde_json::Value::Array(v) if !v.is_empty() => v.clone(),
                serde_json::Value::Array(_) => {
                    return Err(Error::InvalidConfig(format!("grid key {key:?} has no values")))
                }
                single => vec![single.clone()],
            };
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    values.iter().map(move |v| {
                        let mut c = c.clone();
                        c.insert(key.clone(), v.clone());
                        c
                    })
                })
                .collect();
        }
        combos
            .into_iter()
            .map(|mut c| {
                c.insert(
                    "algorithm".into(),
                    serde_json::Value::String(self.algorithm.name().into()),
                );
                let spec: RegressorSpec = serde_json::from_value(serde_json::Value::Object(c))?;
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }
}

/// Cross-validates every spec in order on shared folds. Failed combinations
/// are recorded and skipped; the first minimizer of the mean MAE wins.
pub fn grid_search(
    fm: &FeatureMatrix,
    grid: &[RegressorSpec],
    k: usize,
    seed: u64,
    mode: ScalerMode,
    par: Parallelism,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    // a bad k fails the whole search rather than every combination
    make_folds(fm.n(), k, seed)?;
    let results: Vec<Result<CvReport>> = grid
        .iter()
        .map(|spec| {
            let mut r = evaluate_specs(fm, std::slice::from_ref(spec), k, seed, mode, par)?;
            r.pop().expect("one report")
        })
        .collect();

    let mut best: Option<&CvReport> = None;
    for r in results.iter().flatten() {
        if best.is_none_or(|b| r.mean_mae < b.mean_mae) {
            best = Some(r);
        }
    }
    let best = best
        .cloned()
        .ok_or_else(|| Error::Fit("every grid combination failed".into()))?;
    let table = grid
        .iter()
        .zip(&results)
        .map(|(spec, r)| match r {
            Ok(rep) => GridEntry {
                spec: spec.clone(),
                mean_mae: Some(rep.mean_mae),
                error: None,
            },
            Err(e) => GridEntry {
                spec: spec.clone(),
                mean_mae: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(GridSearchResult {
        best_spec: best.spec.clone(),
        best_mean_mae: best.mean_mae,
        best_report: best,
        table,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub artifact_version: String,
    /// FNV-1a digest of the feature matrix, hex.
    pub dataset_digest: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub k: usize,
    pub seed: u64,
    pub scaler_mode: ScalerMode,
    /// Caller-supplied description of the input (file name, synthetic config).
    #[serde(default)]
    pub input: serde_json::Value,
}

impl RunHeader {
    pub fn new(fm: &FeatureMatrix, k: usize, seed: u64, mode: ScalerMode, input: serde_json::Value) -> Self {
        Self {
            artifact_version: ARTIFACT_VERSION.to_string(),
            dataset_digest: format!("{:016x}", fm.digest()),
            n_samples: fm.n(),
            n_features: fm.width(),
            k,
            seed,
            scaler_mode: mode,
            input,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub header: RunHeader,
    /// Roster order.
    pub reports: Vec<CvReport>,
    /// Index into `reports` of the lowest mean MAE (first on ties).
    pub best: usize,
}

/// Cross-validates every spec on identical folds. Reports come back in
/// roster order (stable for repeated algorithms). Any failure aborts the run.
pub fn benchmark(
    fm: &FeatureMatrix,
    specs: &[RegressorSpec],
    k: usize,
    seed: u64,
    mode: ScalerMode,
    par: Parallelism,
) -> Result<BenchmarkReport> {
    if specs.is_empty() {
        return Err(Error::InvalidConfig("no models to benchmark".into()));
    }
    let mut ordered = specs.to_vec();
    ordered.sort_by_key(|s| s.algorithm().roster_index());
    let reports = evaluate_specs(fm, &ordered, k, seed, mode, par)?
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let best = reports
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.mean_mae < reports[b].mean_mae { i } else { b });
    Ok(BenchmarkReport {
        header: RunHeader::new(fm, k, seed, mode, serde_json::Value::Null),
        reports,
        best,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidConfig(format!("unknown format {other:?}"))),
        }
    }
}

impl BenchmarkReport {
    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => {
                let mut s = serde_json::to_string_pretty(self).expect("report serializes");
                s.push('\n');
                s
            }
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Markdown => self.to_markdown(),
        }
    }

    /// Full-precision CSV, one row per model; fold MAEs are `;`-separated.
    pub fn to_csv(&self) -> String {
        let h = &self.header;
        let mut s = format!(
            "# artifact_version={} dataset_digest={} n={} k={} seed={} scaler_mode={}\n",
            h.artifact_version,
            h.dataset_digest,
            h.n_samples,
            h.k,
            h.seed,
            h.scaler_mode.label()
        );
        s.push_str("model,seed,scaler_mode,k,mean_mae,std_mae,best,per_fold_mae\n");
        for (i, r) in self.reports.iter().enumerate() {
            let folds: Vec<String> = r.per_fold_mae.iter().map(f64::to_string).collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                r.model_name,
                r.seed,
                r.scaler_mode.label(),
                r.k,
                r.mean_mae,
                r.std_mae,
                i == self.best,
                folds.join(";")
            );
        }
        s
    }

    /// Summary table rounded to one decimal degree; the best model is
    /// starred.
    pub fn to_markdown(&self) -> String {
        let h = &self.header;
        let mut s = format!(
            "Mean absolute error of Cobb angle, {}-fold cross-validation (seed {}, scaler {}, dataset {})\n\n",
            h.k,
            h.seed,
            h.scaler_mode.label(),
            h.dataset_digest
        );
        s.push_str("| No. | Regression algorithm | CV MAE (SD) degrees |\n|---:|---|---|\n");
        for (i, r) in self.reports.iter().enumerate() {
            let star = if i == self.best { "*" } else { "" };
            let _ = writeln!(
                s,
                "| {} | {star}{} | {:.1} ({:.1}) |",
                i + 1,
                r.model_name,
                r.mean_mae,
                r.std_mae
            );
        }
        s.push_str("\n*Lowest mean MAE\n");
        s
    }
}
