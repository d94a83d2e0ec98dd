//! Model files: a fitted regressor with the scaler it was trained behind,
//! stored as JSON with a format version.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{fit_scaler, FeatureMatrix, ScalerParams};
use crate::regressors::{self, RegressorSpec, TrainedModel};
use crate::ARTIFACT_VERSION;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format_version: u32,
    pub artifact_version: String,
    pub feature_names: Vec<String>,
    pub scaler: ScalerParams,
    pub model: TrainedModel,
}

impl ModelBundle {
    /// Fits the scaler on all rows, then the model on the scaled rows.
    pub fn train(fm: &FeatureMatrix, spec: &RegressorSpec, seed: u64) -> Result<Self> {
        let scaler = fit_scaler(&fm.rows)?;
        let x = fm
            .rows
            .iter()
            .map(|r| scaler.transform_row(r))
            .collect::<Result<Vec<_>>>()?;
        let model = regressors::fit(spec, &x, &fm.targets, seed)?;
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            artifact_version: ARTIFACT_VERSION.to_string(),
            feature_names: fm.feature_names.clone(),
            scaler,
            model,
        })
    }

    /// Predictions for raw (unscaled) feature rows.
    pub fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let x = rows
            .iter()
            .map(|r| self.scaler.transform_row(r))
            .collect::<Result<Vec<_>>>()?;
        self.model.predict(&x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let version = v.get("format_version").and_then(|f| f.as_u64());
        if version != Some(MODEL_FORMAT_VERSION as u64) {
            return Err(Error::Serde(format!(
                "unsupported model format version {version:?}, expected {MODEL_FORMAT_VERSION}"
            )));
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
