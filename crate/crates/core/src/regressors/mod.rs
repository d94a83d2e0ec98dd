//! Regression algorithms behind one fit/predict contract.
//!
//! A [`RegressorSpec`] names an algorithm and carries its hyperparameters;
//! every default below is pinned so behavior does not depend on any outside
//! library:
//!
//! | algorithm | defaults |
//! |---|---|
//! | knn | k = 3 |
//! | svr_linear | C = 100, epsilon = 0.1, tol = 1e-3, max_sweeps = 100000 |
//! | random_forest | 100 trees, mae criterion, max_depth = 15, floor(log2 d) features per split, bootstrap |
//! | linear | ordinary least squares |
//! | ridge | alpha = 0.1 |
//! | lasso | alpha = 0.1, max_iter = 10000, random selection, tol = 1e-4 |
//! | gaussian_process | dot product (sigma0_sq = 1) + white (noise = 1), coarse-grid search, targets centred |
//! | mlp | 60 logistic units, Adam lr 0.003 (0.9, 0.999, 1e-8), 1000 epochs, stop after 10 epochs without 1e-4 improvement, l2 = 1e-4 |
//! | adaboost | 250 rounds, learning_rate = 1.1, linear loss, depth-3 mse trees |
//! | decision_tree | max_depth = 4, mse |
//! | bagging | 20 unbounded mse trees, bootstrap |
//! | gradient_boosting | huber, alpha = 0.85, learning_rate = 1, 100 rounds, depth-3 mae trees |
//! | mean_baseline | predicts the training mean |

pub mod adaboost;
pub mod boosting;
pub mod ensemble;
pub mod gp;
pub mod knn;
pub mod lasso;
pub mod linear;
pub mod mlp;
pub mod svr;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use adaboost::{AdaBoostModel, BoostLoss};
use boosting::{GbLoss, GbModel};
use ensemble::TreeEnsemble;
use gp::{GpModel, GpOptimize};
use knn::KnnModel;
use lasso::{LassoModel, Selection};
use linear::LinearModel;
use mlp::{AdamSettings, MlpModel, MlpTraining};
use svr::SvrModel;
use tree::{Criterion, Tree, TreeOptions};

/// Algorithms in report order; the baseline comes last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Knn,
    SvrLinear,
    RandomForest,
    Linear,
    Ridge,
    Lasso,
    GaussianProcess,
    Mlp,
    AdaBoost,
    DecisionTree,
    Bagging,
    GradientBoosting,
    MeanBaseline,
}

impl Algorithm {
    pub const ALL: [Algorithm; 13] = [
        Algorithm::Knn,
        Algorithm::SvrLinear,
        Algorithm::RandomForest,
        Algorithm::Linear,
        Algorithm::Ridge,
        Algorithm::Lasso,
        Algorithm::GaussianProcess,
        Algorithm::Mlp,
        Algorithm::AdaBoost,
        Algorithm::DecisionTree,
        Algorithm::Bagging,
        Algorithm::GradientBoosting,
        Algorithm::MeanBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::SvrLinear => "svr_linear",
            Algorithm::RandomForest => "random_forest",
            Algorithm::Linear => "linear",
            Algorithm::Ridge => "ridge",
            Algorithm::Lasso => "lasso",
            Algorithm::GaussianProcess => "gaussian_process",
            Algorithm::Mlp => "mlp",
            Algorithm::AdaBoost => "adaboost",
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::Bagging => "bagging",
            Algorithm::GradientBoosting => "gradient_boosting",
            Algorithm::MeanBaseline => "mean_baseline",
        }
    }

    /// Position in the report roster.
    pub fn roster_index(self) -> usize {
        self as usize
    }

    pub fn default_spec(self) -> RegressorSpec {
        match self {
            Algorithm::Knn => RegressorSpec::Knn(Default::default()),
            Algorithm::SvrLinear => RegressorSpec::SvrLinear(Default::default()),
            Algorithm::RandomForest => RegressorSpec::RandomForest(Default::default()),
            Algorithm::Linear => RegressorSpec::Linear,
            Algorithm::Ridge => RegressorSpec::Ridge(Default::default()),
            Algorithm::Lasso => RegressorSpec::Lasso(Default::default()),
            Algorithm::GaussianProcess => RegressorSpec::GaussianProcess(Default::default()),
            Algorithm::Mlp => RegressorSpec::Mlp(Default::default()),
            Algorithm::AdaBoost => RegressorSpec::AdaBoost(Default::default()),
            Algorithm::DecisionTree => RegressorSpec::DecisionTree(Default::default()),
            Algorithm::Bagging => RegressorSpec::Bagging(Default::default()),
            Algorithm::GradientBoosting => RegressorSpec::GradientBoosting(Default::default()),
            Algorithm::MeanBaseline => RegressorSpec::MeanBaseline,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrParams {
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 100.0,
            epsilon: 0.1,
            tol: 1e-3,
            max_sweeps: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    Log2,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub criterion: Criterion,
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            criterion: Criterion::Mae,
            max_depth: Some(15),
            max_features: MaxFeatures::Log2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RidgeParams {
    pub alpha: f64,
}

impl Default for RidgeParams {
    fn default() -> Self {
        Self { alpha: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoParams {
    pub alpha: f64,
    pub max_iter: usize,
    pub selection: Selection,
    pub tol: f64,
}

impl Default for LassoParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            max_iter: 10_000,
            selection: Selection::Random,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpParams {
    pub sigma0_sq: f64,
    pub noise: f64,
    pub optimize: GpOptimize,
    /// Fit to `y - mean(y)` and add the mean back at prediction.
    pub center_targets: bool,
}

impl Default for GpParams {
    fn default() -> Self {
        Self {
            sigma0_sq: 1.0,
            noise: 1.0,
            optimize: GpOptimize::CoarseGrid,
            center_targets: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub learning_rate_init: f64,
    pub max_iter: usize,
    pub n_iter_no_change: usize,
    pub improvement_tol: f64,
    pub l2_alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 60,
            learning_rate_init: 0.003,
            max_iter: 1000,
            n_iter_no_change: 10,
            improvement_tol: 1e-4,
            l2_alpha: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub loss: BoostLoss,
    pub base_max_depth: Option<usize>,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 250,
            learning_rate: 1.1,
            loss: BoostLoss::Linear,
            base_max_depth: Some(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub criterion: Criterion,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: Some(4),
            criterion: Criterion::Mse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaggingParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub criterion: Criterion,
    pub bootstrap: bool,
}

impl Default for BaggingParams {
    fn default() -> Self {
        Self {
            n_estimators: 20,
            max_depth: None,
            criterion: Criterion::Mse,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbParams {
    pub loss: GbLoss,
    pub huber_alpha: f64,
    pub learning_rate: f64,
    pub max_depth: Option<usize>,
    pub n_estimators: usize,
    pub tree_criterion: Criterion,
}

impl Default for GbParams {
    fn default() -> Self {
        Self {
            loss: GbLoss::Huber,
            huber_alpha: 0.85,
            learning_rate: 1.0,
            max_depth: Some(3),
            n_estimators: 100,
            tree_criterion: Criterion::Mae,
        }
    }
}

/// Algorithm choice with hyperparameters. Serialized as a flat object with
/// an `algorithm` tag, e.g. `{"algorithm": "ridge", "alpha": 0.1}`; omitted
/// fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
pub enum RegressorSpec {
    Knn(KnnParams),
    SvrLinear(SvrParams),
    RandomForest(ForestParams),
    Linear,
    Ridge(RidgeParams),
    Lasso(LassoParams),
    GaussianProcess(GpParams),
    Mlp(MlpParams),
    AdaBoost(AdaBoostParams),
    DecisionTree(TreeParams),
    Bagging(BaggingParams),
    GradientBoosting(GbParams),
    MeanBaseline,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be > 0, got {v}")))
    }
}

fn at_least_one(name: &str, v: usize) -> Result<()> {
    if v >= 1 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must be >= 1")))
    }
}

fn depth_ok(v: Option<usize>) -> Result<()> {
    match v {
        Some(0) => Err(Error::InvalidConfig("max_depth must be >= 1 or null".into())),
        _ => Ok(()),
    }
}

impl RegressorSpec {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            RegressorSpec::Knn(_) => Algorithm::Knn,
            RegressorSpec::SvrLinear(_) => Algorithm::SvrLinear,
            RegressorSpec::RandomForest(_) => Algorithm::RandomForest,
            RegressorSpec::Linear => Algorithm::Linear,
            RegressorSpec::Ridge(_) => Algorithm::Ridge,
            RegressorSpec::Lasso(_) => Algorithm::Lasso,
            RegressorSpec::GaussianProcess(_) => Algorithm::GaussianProcess,
            RegressorSpec::Mlp(_) => Algorithm::Mlp,
            RegressorSpec::AdaBoost(_) => Algorithm::AdaBoost,
            RegressorSpec::DecisionTree(_) => Algorithm::DecisionTree,
            RegressorSpec::Bagging(_) => Algorithm::Bagging,
            RegressorSpec::GradientBoosting(_) => Algorithm::GradientBoosting,
            RegressorSpec::MeanBaseline => Algorithm::MeanBaseline,
        }
    }

    pub fn name(&self) -> &'static str {
        self.algorithm().name()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RegressorSpec::Knn(p) => at_least_one("k", p.k),
            RegressorSpec::SvrLinear(p) => {
                positive("C", p.c)?;
                positive("tol", p.tol)?;
                at_least_one("max_sweeps", p.max_sweeps)?;
                if p.epsilon >= 0.0 && p.epsilon.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig("epsilon must be >= 0".into()))
                }
            }
            RegressorSpec::RandomForest(p) => {
                at_least_one("n_estimators", p.n_estimators)?;
                depth_ok(p.max_depth)
            }
            RegressorSpec::Linear | RegressorSpec::MeanBaseline => Ok(()),
            RegressorSpec::Ridge(p) => positive("alpha", p.alpha),
            RegressorSpec::Lasso(p) => {
                positive("alpha", p.alpha)?;
                positive("tol", p.tol)?;
                at_least_one("max_iter", p.max_iter)
            }
            RegressorSpec::GaussianProcess(p) => {
                positive("sigma0_sq", p.sigma0_sq)?;
                positive("noise", p.noise)
            }
            RegressorSpec::Mlp(p) => {
                at_least_one("hidden", p.hidden)?;
                at_least_one("max_iter", p.max_iter)?;
                at_least_one("n_iter_no_change", p.n_iter_no_change)?;
                positive("learning_rate_init", p.learning_rate_init)?;
                positive("improvement_tol", p.improvement_tol)?;
                positive("adam_epsilon", p.adam_epsilon)?;
                if !(p.l2_alpha >= 0.0) {
                    return Err(Error::InvalidConfig("l2_alpha must be >= 0".into()));
                }
                for (n, b) in [("beta1", p.beta1), ("beta2", p.beta2)] {
                    if !(0.0..1.0).contains(&b) {
                        return Err(Error::InvalidConfig(format!("{n} must be in [0, 1)")));
                    }
                }
                Ok(())
            }
            RegressorSpec::AdaBoost(p) => {
                at_least_one("n_estimators", p.n_estimators)?;
                positive("learning_rate", p.learning_rate)?;
                depth_ok(p.base_max_depth)
            }
            RegressorSpec::DecisionTree(p) => depth_ok(p.max_depth),
            RegressorSpec::Bagging(p) => {
                at_least_one("n_estimators", p.n_estimators)?;
                depth_ok(p.max_depth)
            }
            RegressorSpec::GradientBoosting(p) => {
                at_least_one("n_estimators", p.n_estimators)?;
                positive("learning_rate", p.learning_rate)?;
                depth_ok(p.max_depth)?;
                if p.huber_alpha > 0.0 && p.huber_alpha < 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig("huber_alpha must be in (0, 1)".into()))
                }
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }
}

/// Fitted state per algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FittedState {
    Knn(KnnModel),
    Linear(LinearModel),
    Lasso(LassoModel),
    Svr(SvrModel),
    GaussianProcess(GpModel),
    Mlp(MlpModel),
    AdaBoost(AdaBoostModel),
    Tree(Tree),
    Ensemble(TreeEnsemble),
    GradientBoosting(GbModel),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: RegressorSpec,
    pub seed: u64,
    pub n_features: usize,
    pub state: FittedState,
}

/// Checks the training table: equal lengths, at least one row, common width,
/// finite values. Returns the width.
fn check_training(x: &[Vec<f64>], y: &[f64]) -> Result<usize> {
    let d = tree::check_xy(x, y)?;
    if y.is_empty() {
        return Err(Error::InvalidInput("cannot fit on no samples".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("training data contains non-finite values".into()));
    }
    Ok(d)
}

pub fn fit(spec: &RegressorSpec, x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<TrainedModel> {
    spec.validate()?;
    let d = check_training(x, y)?;
    let state = match spec {
        RegressorSpec::Knn(p) => FittedState::Knn(KnnModel::fit(x, y, p.k)?),
        RegressorSpec::SvrLinear(p) => {
            FittedState::Svr(svr::fit_svr(x, y, p.c, p.epsilon, p.tol, p.max_sweeps)?)
        }
        RegressorSpec::RandomForest(p) => {
            let max_features = match p.max_features {
                MaxFeatures::Log2 => Some(ensemble::log2_features(d)),
                MaxFeatures::All => None,
            };
            let opts = TreeOptions {
                max_depth: p.max_depth,
                criterion: p.criterion,
                max_features,
            };
            FittedState::Ensemble(ensemble::fit_ensemble(
                x,
                y,
                p.n_estimators,
                &opts,
                p.bootstrap,
                seed,
            )?)
        }
        RegressorSpec::Linear => FittedState::Linear(linear::fit_linear(x, y, 0.0)?),
        RegressorSpec::Ridge(p) => FittedState::Linear(linear::fit_linear(x, y, p.alpha)?),
        RegressorSpec::Lasso(p) => FittedState::Lasso(lasso::fit_lasso(
            x,
            y,
            p.alpha,
            p.max_iter,
            p.tol,
            p.selection,
            seed,
        )?),
        RegressorSpec::GaussianProcess(p) => {
            FittedState::GaussianProcess(if p.center_targets {
                gp::fit_gp_centered(x, y, p.sigma0_sq, p.noise, p.optimize)?
            } else {
                gp::fit_gp(x, y, p.sigma0_sq, p.noise, p.optimize)?
            })
        }
        RegressorSpec::Mlp(p) => {
            let cfg = MlpTraining {
                hidden: p.hidden,
                adam: AdamSettings {
                    learning_rate: p.learning_rate_init,
                    beta1: p.beta1,
                    beta2: p.beta2,
                    epsilon: p.adam_epsilon,
                },
                max_iter: p.max_iter,
                n_iter_no_change: p.n_iter_no_change,
                improvement_tol: p.improvement_tol,
                l2: p.l2_alpha,
            };
            FittedState::Mlp(mlp::fit_mlp(x, y, &cfg, seed)?)
        }
        RegressorSpec::AdaBoost(p) => FittedState::AdaBoost(adaboost::fit_adaboost(
            x,
            y,
            p.n_estimators,
            p.learning_rate,
            p.loss,
            p.base_max_depth,
            seed,
        )?),
        RegressorSpec::DecisionTree(p) => FittedState::Tree(Tree::fit(
            x,
            y,
            &TreeOptions {
                max_depth: p.max_depth,
                criterion: p.criterion,
                max_features: None,
            },
        )?),
        RegressorSpec::Bagging(p) => {
            let opts = TreeOptions {
                max_depth: p.max_depth,
                criterion: p.criterion,
                max_features: None,
            };
            FittedState::Ensemble(ensemble::fit_ensemble(
                x,
                y,
                p.n_estimators,
                &opts,
                p.bootstrap,
                seed,
            )?)
        }
        RegressorSpec::GradientBoosting(p) => {
            let opts = TreeOptions {
                max_depth: p.max_depth,
                criterion: p.tree_criterion,
                max_features: None,
            };
            FittedState::GradientBoosting(boosting::fit_gradient_boosting(
                x,
                y,
                p.loss,
                p.huber_alpha,
                p.learning_rate,
                p.n_estimators,
                &opts,
            )?)
        }
        RegressorSpec::MeanBaseline => {
            FittedState::Constant(y.iter().sum::<f64>() / y.len() as f64)
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        seed,
        n_features: d,
        state,
    })
}

impl TrainedModel {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.state {
            FittedState::Knn(m) => m.predict_row(row),
            FittedState::Linear(m) => m.predict_row(row),
            FittedState::Lasso(m) => m.predict_row(row),
            FittedState::Svr(m) => m.predict_row(row),
            FittedState::GaussianProcess(m) => m.predict_row(row),
            FittedState::Mlp(m) => m.predict_row(row),
            FittedState::AdaBoost(m) => m.predict_row(row),
            FittedState::Tree(t) => t.predict_row(row),
            FittedState::Ensemble(m) => m.predict_row(row),
            FittedState::GradientBoosting(m) => m.predict_row(row),
            FittedState::Constant(c) => *c,
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter()
            .map(|row| {
                if row.len() != self.n_features {
                    return Err(Error::DimensionMismatch {
                        expected: self.n_features,
                        got: row.len(),
                    });
                }
                let p = self.predict_row(row);
                if p.is_finite() {
                    Ok(p)
                } else {
                    Err(Error::Fit(format!("{} produced a non-finite prediction", self.spec.name())))
                }
            })
            .collect()
    }

    /// False for a lasso or SVR fit that stopped on its iteration cap.
    pub fn converged(&self) -> bool {
        match &self.state {
            FittedState::Lasso(m) => m.converged,
            FittedState::Svr(m) => m.converged,
            _ => true,
        }
    }
}
