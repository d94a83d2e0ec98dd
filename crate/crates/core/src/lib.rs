//! Radiation-free Cobb angle estimation benchmark.
//!
//! The crate is organised as a pipeline:
//!
//! - [`data`]: trial CSV ingestion, validation and the seeded synthetic generator.
//! - [`features`]: six summary statistics per effort signal (18 per participant)
//!   and standard scaling.
//! - [`regressors`]: twelve regression algorithms plus a mean baseline behind a
//!   single fit/predict contract.
//! - [`evaluation`]: MAE, seeded k-fold cross-validation, grid search and the
//!   multi-model benchmark with its serialized report.
//! - [`persist`]: versioned model files.

pub mod data;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod persist;
pub mod regressors;
pub mod rng;

pub use error::{Error, Result};

/// Version string embedded in reports and model files.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
