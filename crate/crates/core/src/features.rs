//! Per-signal summary statistics, the participant feature matrix and
//! standard scaling.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{csv_err, validate_dataset, Dataset, EffortSignalKind, ParticipantRecord};
use crate::error::{Error, Result};

pub const STATS_PER_SIGNAL: usize = 6;
pub const N_FEATURES: usize = STATS_PER_SIGNAL * 3;

/// Column-name suffixes of the six statistics, in order.
pub const STAT_NAMES: [&str; STATS_PER_SIGNAL] = [
    "f1_peak_deviation",
    "f2_var_plus_absmean",
    "f3_peak_magnitude",
    "f4_mean",
    "f5_std",
    "f6_range",
];

/// One feature row: ml_force f1..f6, ap_torque f1..f6, ml_torque f1..f6.
pub type FeatureVector = [f64; N_FEATURES];

/// How to read the two max-of-pair statistics (f1, f3).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsReading {
    /// f1 = max(hi - m, m - lo), f3 = max(|hi|, |lo|).
    #[default]
    Deviation,
    /// f1 = max(hi - m, lo - m) = hi - m, f3 = max(hi, lo) = hi.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalStats {
    pub f1_peak_deviation: f64,
    pub f2_var_plus_absmean: f64,
    pub f3_peak_magnitude: f64,
    pub f4_mean: f64,
    pub f5_std: f64,
    pub f6_range: f64,
}

impl SignalStats {
    pub fn to_array(&self) -> [f64; STATS_PER_SIGNAL] {
        [
            self.f1_peak_deviation,
            self.f2_var_plus_absmean,
            self.f3_peak_magnitude,
            self.f4_mean,
            self.f5_std,
            self.f6_range,
        ]
    }
}

pub fn signal_stats(samples: &[f64]) -> Result<SignalStats> {
    signal_stats_with(samples, StatsReading::Deviation)
}

/// Population statistics of one sample sequence.
pub fn signal_stats_with(samples: &[f64], reading: StatsReading) -> Result<SignalStats> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("signal_stats of an empty signal".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));

    let (f1, f3) = match reading {
        StatsReading::Deviation => ((hi - mean).max(mean - lo), hi.abs().max(lo.abs())),
        StatsReading::Literal => ((hi - mean).max(lo - mean), hi.max(lo)),
    };
    Ok(SignalStats {
        f1_peak_deviation: f1,
        f2_var_plus_absmean: (var - mean).max(var + mean),
        f3_peak_magnitude: f3,
        f4_mean: mean,
        f5_std: var.sqrt(),
        f6_range: hi - lo,
    })
}

pub fn extract_features(p: &ParticipantRecord) -> Result<FeatureVector> {
    extract_features_with(p, StatsReading::Deviation)
}

/// Statistics of each signal over all of its cycles concatenated.
pub fn extract_features_with(p: &ParticipantRecord, reading: StatsReading) -> Result<FeatureVector> {
    let mut out = [0.0; N_FEATURES];
    for (block, kind) in EffortSignalKind::ALL.into_iter().enumerate() {
        let samples = p.concatenated(kind);
        if samples.is_empty() {
            return Err(Error::InvalidInput(format!(
                "participant {}: signal {kind} has no samples",
                p.id
            )));
        }
        let stats = signal_stats_with(&samples, reading)?;
        out[block * STATS_PER_SIGNAL..(block + 1) * STATS_PER_SIGNAL]
            .copy_from_slice(&stats.to_array());
    }
    Ok(out)
}

pub fn canonical_feature_names() -> Vec<String> {
    EffortSignalKind::ALL
        .iter()
        .flat_map(|k| STAT_NAMES.iter().map(move |s| format!("{}_{s}", k.label())))
        .collect()
}

/// Row-indexed access to a feature table.
pub trait RowAccess {
    fn n_rows(&self) -> usize;
    fn width(&self) -> usize;
    fn row(&self, i: usize) -> &[f64];
}

impl RowAccess for [Vec<f64>] {
    fn n_rows(&self) -> usize {
        self.len()
    }

    fn width(&self) -> usize {
        self.first().map_or(0, Vec::len)
    }

    fn row(&self, i: usize) -> &[f64] {
        &self[i]
    }
}

/// Features with targets, one row per participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub ids: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
        targets: Vec<f64>,
        ids: Vec<String>,
    ) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidInput("feature matrix has no rows".into()));
        }
        if targets.len() != n || ids.len() != n {
            return Err(Error::InvalidInput(format!(
                "feature matrix has {n} rows, {} targets, {} ids",
                targets.len(),
                ids.len()
            )));
        }
        let width = feature_names.len();
        if width == 0 {
            return Err(Error::InvalidInput("feature matrix has no columns".into()));
        }
        for r in &rows {
            if r.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("non-finite feature value".into()));
            }
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("non-finite target".into()));
        }
        Ok(Self {
            feature_names,
            rows,
            targets,
            ids,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    /// Rows and targets at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            indices.iter().map(|&i| self.rows[i].clone()).collect(),
            indices.iter().map(|&i| self.targets[i]).collect(),
        )
    }

    /// FNV-1a over ids, targets and feature bits. Stable across platforms.
    pub fn digest(&self) -> u64 {
        const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
        const PRIME: u64 = 0x0000_0100_0000_01b3;
        let mut h = OFFSET;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= u64::from(*b);
                h = h.wrapping_mul(PRIME);
            }
        };
        eat(&(self.n() as u64).to_le_bytes());
        eat(&(self.width() as u64).to_le_bytes());
        for name in &self.feature_names {
            eat(name.as_bytes());
            eat(&[0]);
        }
        for ((id, t), row) in self.ids.iter().zip(&self.targets).zip(&self.rows) {
            eat(id.as_bytes());
            eat(&[0]);
            eat(&t.to_bits().to_le_bytes());
            for v in row {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }
}

impl RowAccess for FeatureMatrix {
    fn n_rows(&self) -> usize {
        self.rows.len()
    }

    fn width(&self) -> usize {
        self.feature_names.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

pub fn build_matrix(d: &Dataset) -> Result<FeatureMatrix> {
    build_matrix_with(d, StatsReading::Deviation)
}

pub fn build_matrix_with(d: &Dataset, reading: StatsReading) -> Result<FeatureMatrix> {
    let violations = validate_dataset(d);
    if let Some(v) = violations.first() {
        return Err(Error::InvalidDataset(v.to_string()));
    }
    let rows = d
        .participants
        .iter()
        .map(|p| extract_features_with(p, reading).map(|f| f.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::new(
        canonical_feature_names(),
        rows,
        d.participants.iter().map(|p| p.cobb_angle_deg).collect(),
        d.participants.iter().map(|p| p.id.clone()).collect(),
    )
}

pub const FEATURE_CSV_PREFIX: &str = "participant_id,cobb_angle_deg";

pub fn write_features_csv<W: Write>(fm: &FeatureMatrix, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header = vec!["participant_id".to_string(), "cobb_angle_deg".to_string()];
    header.extend(fm.feature_names.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for ((id, t), row) in fm.ids.iter().zip(&fm.targets).zip(&fm.rows) {
        let mut rec = vec![id.clone(), t.to_string()];
        rec.extend(row.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn features_csv_string(fm: &FeatureMatrix) -> Result<String> {
    let mut buf = Vec::new();
    write_features_csv(fm, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Serde(e.to_string()))
}

/// Reads a feature-matrix CSV of any positive width.
pub fn parse_features_csv(text: &str) -> Result<FeatureMatrix> {
    let first = text.lines().next().unwrap_or("");
    if !first.starts_with(FEATURE_CSV_PREFIX) {
        return Err(Error::parse(
            1,
            format!("feature header must start with {FEATURE_CSV_PREFIX:?}"),
        ));
    }
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::parse(1, e.to_string()))?.clone();
    let names: Vec<String> = header.iter().skip(2).map(str::to_owned).collect();
    if names.is_empty() {
        return Err(Error::parse(1, "no feature columns"));
    }
    let (mut rows, mut targets, mut ids) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| {
            Error::parse(e.position().map_or(0, |p| p.line() as usize), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line, format!("not a finite number: {s:?}")))
        };
        ids.push(record[0].to_string());
        targets.push(parse(&record[1])?);
        rows.push(record.iter().skip(2).map(parse).collect::<Result<Vec<_>>>()?);
    }
    FeatureMatrix::new(names, rows, targets, ids)
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

/// Columns with population std below this are left unscaled.
pub const MIN_SCALE: f64 = 1e-12;

pub fn fit_scaler(rows: &[Vec<f64>]) -> Result<ScalerParams> {
    let all: Vec<usize> = (0..rows.len()).collect();
    fit_scaler_on(rows, &all)
}

/// Fits on the listed rows only; no other row is read.
pub fn fit_scaler_on<R: RowAccess + ?Sized>(rows: &R, indices: &[usize]) -> Result<ScalerParams> {
    if indices.is_empty() {
        return Err(Error::InvalidInput("fit_scaler on no rows".into()));
    }
    let width = rows.width();
    let n = indices.len() as f64;
    let mut mean = vec![0.0; width];
    for &i in indices {
        let r = rows.row(i);
        if r.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: r.len(),
            });
        }
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; width];
    for &i in indices {
        for ((s, v), m) in var.iter_mut().zip(rows.row(i)).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd < MIN_SCALE {
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(ScalerParams { mean, scale })
}

impl ScalerParams {
    pub fn width(&self) -> usize {
        self.mean.len()
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn inverse_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.width() {
            return Err(Error::DimensionMismatch {
                expected: self.width(),
                got: row.len(),
            });
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(z, (m, s))| z * s + m)
            .collect())
    }
}

pub fn apply_scaler(p: &ScalerParams, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| p.transform_row(r)).collect()
}
