//! Participant gait-effort data: the trial CSV format, dataset validation and
//! the seeded synthetic generator.
//!
//! Trial CSV is long-form, one sample per row:
//!
//! ```text
//! participant_id,cobb_angle_deg,signal,cycle,sample_index,value
//! P001,37.5,ml_force,0,0,41.25
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const TRIAL_CSV_HEADER: &str = "participant_id,cobb_angle_deg,signal,cycle,sample_index,value";

/// The three lumbosacral effort channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffortSignalKind {
    /// Mediolateral force, newtons.
    MlForce,
    /// Anteroposterior torque, newton-meters.
    ApTorque,
    /// Mediolateral torque, newton-meters.
    MlTorque,
}

impl EffortSignalKind {
    /// Canonical order, also the order of feature blocks.
    pub const ALL: [EffortSignalKind; 3] = [
        EffortSignalKind::MlForce,
        EffortSignalKind::ApTorque,
        EffortSignalKind::MlTorque,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EffortSignalKind::MlForce => "ml_force",
            EffortSignalKind::ApTorque => "ap_torque",
            EffortSignalKind::MlTorque => "ml_torque",
        }
    }
}

impl fmt::Display for EffortSignalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for EffortSignalKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        EffortSignalKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| format!("unknown signal label {s:?}"))
    }
}

/// One gait cycle of one signal, uniformly sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitCycleSeries {
    pub cycle_index: usize,
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub cobb_angle_deg: f64,
    pub signals: BTreeMap<EffortSignalKind, Vec<GaitCycleSeries>>,
}

impl ParticipantRecord {
    /// All samples of one signal, cycles concatenated in order.
    pub fn concatenated(&self, kind: EffortSignalKind) -> Vec<f64> {
        self.signals
            .get(&kind)
            .map(|cycles| {
                cycles
                    .iter()
                    .flat_map(|c| c.samples.iter().copied())
                    .collect()
            })
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub participants: Vec<ParticipantRecord>,
    pub cycles_per_participant: usize,
}

/// A single broken invariant found by [`validate_dataset`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub participant: Option<String>,
    pub signal: Option<EffortSignalKind>,
    pub message: String,
}

impl Violation {
    fn new(participant: Option<&str>, signal: Option<EffortSignalKind>, message: impl Into<String>) -> Self {
        Self {
            participant: participant.map(str::to_owned),
            signal,
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = &self.participant {
            write!(f, "participant {p}")?;
            if let Some(s) = self.signal {
                write!(f, " signal {s}")?;
            }
            write!(f, ": ")?;
        }
        f.write_str(&self.message)
    }
}

/// Lists every broken dataset invariant. An empty list means the dataset is
/// valid.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    if d.participants.is_empty() {
        out.push(Violation::new(None, None, "dataset has no participants"));
    }
    if d.cycles_per_participant == 0 {
        out.push(Violation::new(None, None, "cycles_per_participant must be at least 1"));
    }

    let mut seen = HashSet::new();
    for p in &d.participants {
        let pid = Some(p.id.as_str());
        if p.id.is_empty() {
            out.push(Violation::new(pid, None, "empty participant id"));
        }
        if !seen.insert(p.id.as_str()) {
            out.push(Violation::new(pid, None, "duplicate participant id"));
        }
        if !(p.cobb_angle_deg.is_finite() && p.cobb_angle_deg > 0.0) {
            out.push(Violation::new(
                pid,
                None,
                format!("cobb_angle_deg must be finite and > 0, got {}", p.cobb_angle_deg),
            ));
        }

        let mut sample_len: Option<usize> = None;
        for kind in EffortSignalKind::ALL {
            let Some(cycles) = p.signals.get(&kind) else {
                out.push(Violation::new(pid, Some(kind), "missing signal"));
                continue;
            };
            if cycles.len() != d.cycles_per_participant {
                out.push(Violation::new(
                    pid,
                    Some(kind),
                    format!(
                        "has {} cycles, expected {}",
                        cycles.len(),
                        d.cycles_per_participant
                    ),
                ));
            }
            for (pos, c) in cycles.iter().enumerate() {
                if c.cycle_index != pos {
                    out.push(Violation::new(
                        pid,
                        Some(kind),
                        format!("cycle at position {pos} has index {}", c.cycle_index),
                    ));
                }
                if c.samples.is_empty() {
                    out.push(Violation::new(
                        pid,
                        Some(kind),
                        format!("cycle {} has no samples", c.cycle_index),
                    ));
                }
                if let Some(v) = c.samples.iter().find(|v| !v.is_finite()) {
                    out.push(Violation::new(
                        pid,
                        Some(kind),
                        format!("cycle {} has non-finite value {v}", c.cycle_index),
                    ));
                }
                match sample_len {
                    None => sample_len = Some(c.samples.len()),
                    Some(len) if len != c.samples.len() => out.push(Violation::new(
                        pid,
                        Some(kind),
                        format!(
                            "cycle {} has {} samples, other cycles of this participant have {len}",
                            c.cycle_index,
                            c.samples.len()
                        ),
                    )),
                    Some(_) => {}
                }
            }
        }
        for kind in p.signals.keys() {
            if !EffortSignalKind::ALL.contains(kind) {
                out.push(Violation::new(pid, Some(*kind), "unexpected signal"));
            }
        }
    }
    out
}

fn ensure_valid(d: &Dataset) -> Result<()> {
    let violations = validate_dataset(d);
    if violations.is_empty() {
        Ok(())
    } else {
        let msg = violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidDataset(msg))
    }
}

#[derive(Default)]
struct PendingParticipant {
    cobb: f64,
    cobb_line: usize,
    series: BTreeMap<(EffortSignalKind, usize), BTreeMap<usize, f64>>,
}

/// Parses trial CSV text into a validated [`Dataset`]. Participants keep the
/// order of their first appearance.
pub fn parse_trials_csv(text: &str) -> Result<Dataset> {
    let first = text.lines().next().unwrap_or("");
    if first != TRIAL_CSV_HEADER {
        return Err(Error::parse(
            1,
            format!("header mismatch: expected {TRIAL_CSV_HEADER:?}, got {first:?}"),
        ));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());

    let mut order: Vec<String> = Vec::new();
    let mut pending: HashMap<String, PendingParticipant> = HashMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 6 {
            return Err(Error::parse(
                line,
                format!("expected 6 fields, got {}", record.len()),
            ));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(Error::parse(line, "empty participant_id"));
        }
        let cobb = parse_finite(&record[1], "cobb_angle_deg", line)?;
        let kind: EffortSignalKind = record[2].parse().map_err(|e: String| Error::parse(line, e))?;
        let cycle = parse_index(&record[3], "cycle", line)?;
        let sample = parse_index(&record[4], "sample_index", line)?;
        let value = parse_finite(&record[5], "value", line)?;

        let entry = pending.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            PendingParticipant {
                cobb,
                cobb_line: line,
                ..Default::default()
            }
        });
        if entry.cobb.to_bits() != cobb.to_bits() {
            return Err(Error::parse(
                line,
                format!(
                    "inconsistent cobb_angle_deg for participant {id}: {cobb} here, {} at line {}",
                    entry.cobb, entry.cobb_line
                ),
            ));
        }
        let samples = entry.series.entry((kind, cycle)).or_default();
        if samples.insert(sample, value).is_some() {
            return Err(Error::parse(
                line,
                format!("duplicate row for ({id}, {kind}, cycle {cycle}, sample {sample})"),
            ));
        }
    }

    let mut participants = Vec::with_capacity(order.len());
    for id in order {
        let p = pending.remove(&id).expect("participant recorded in order");
        let mut signals: BTreeMap<EffortSignalKind, Vec<GaitCycleSeries>> = BTreeMap::new();
        for ((kind, cycle), samples) in p.series {
            if let Some((pos, _)) = samples.keys().enumerate().find(|(pos, idx)| pos != *idx) {
                return Err(Error::InvalidDataset(format!(
                    "participant {id} signal {kind} cycle {cycle}: missing sample_index {pos}"
                )));
            }
            signals.entry(kind).or_default().push(GaitCycleSeries {
                cycle_index: cycle,
                samples: samples.into_values().collect(),
            });
        }
        for kind in EffortSignalKind::ALL {
            let cycles = signals.get(&kind).ok_or_else(|| {
                Error::InvalidDataset(format!("participant {id}: missing signal {kind}"))
            })?;
            if let Some(pos) = cycles.iter().enumerate().position(|(pos, c)| c.cycle_index != pos) {
                return Err(Error::InvalidDataset(format!(
                    "participant {id} signal {kind}: missing cycle {pos}"
                )));
            }
        }
        participants.push(ParticipantRecord {
            id,
            cobb_angle_deg: p.cobb,
            signals,
        });
    }

    let cycles_per_participant = participants
        .first()
        .and_then(|p| p.signals.values().map(Vec::len).max())
        .unwrap_or(0);
    let dataset = Dataset {
        participants,
        cycles_per_participant,
    };
    ensure_valid(&dataset)?;
    Ok(dataset)
}

fn parse_finite(field: &str, name: &str, line: usize) -> Result<f64> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("{name}: not a number: {field:?}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("{name}: non-finite value {field:?}")));
    }
    Ok(v)
}

fn parse_index(field: &str, name: &str, line: usize) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::parse(line, format!("{name}: not a non-negative integer: {field:?}")))
}

/// Writes a dataset as trial CSV. Values use the shortest round-trip decimal
/// form, so parsing the output reproduces the dataset exactly.
pub fn write_trials_csv<W: Write>(d: &Dataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(TRIAL_CSV_HEADER.split(','))
        .map_err(csv_err)?;
    for p in &d.participants {
        let cobb = p.cobb_angle_deg.to_string();
        for kind in EffortSignalKind::ALL {
            let Some(cycles) = p.signals.get(&kind) else { continue };
            for c in cycles {
                let cycle = c.cycle_index.to_string();
                for (i, v) in c.samples.iter().enumerate() {
                    w.write_record([
                        p.id.as_str(),
                        cobb.as_str(),
                        kind.label(),
                        cycle.as_str(),
                        i.to_string().as_str(),
                        v.to_string().as_str(),
                    ])
                    .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn trials_csv_string(d: &Dataset) -> Result<String> {
    let mut buf = Vec::new();
    write_trials_csv(d, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Serde(e.to_string()))
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Serde(format!("{other:?}")),
    }
}

/// Parameters of the synthetic cohort generator. Every field has a default,
/// so an empty config file yields the default cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_participants: usize,
    pub cycles: usize,
    pub samples_per_cycle: usize,
    pub angle_min_deg: f64,
    pub angle_max_deg: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_participants: 30,
            cycles: 6,
            samples_per_cycle: 100,
            angle_min_deg: 15.0,
            angle_max_deg: 66.0,
            noise_std: 1.0,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_participants < 2 {
            return bad(format!("n_participants must be >= 2, got {}", self.n_participants));
        }
        if self.cycles < 1 {
            return bad("cycles must be >= 1".into());
        }
        if self.samples_per_cycle < 8 {
            return bad(format!(
                "samples_per_cycle must be >= 8, got {}",
                self.samples_per_cycle
            ));
        }
        if !(self.angle_min_deg.is_finite() && self.angle_max_deg.is_finite()) {
            return bad("angle bounds must be finite".into());
        }
        if self.angle_min_deg <= 0.0 {
            return bad("angle_min_deg must be > 0".into());
        }
        if self.angle_min_deg >= self.angle_max_deg {
            return bad(format!(
                "angle_min_deg ({}) must be < angle_max_deg ({})",
                self.angle_min_deg, self.angle_max_deg
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std must be finite and >= 0, got {}", self.noise_std));
        }
        Ok(())
    }

    /// Reads a flat `key = value` file (TOML syntax). Unknown keys are rejected.
    pub fn from_kv_str(text: &str) -> Result<Self> {
        let cfg: SyntheticConfig =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_kv_string(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}

/// Waveform of one synthetic signal kind. For a participant with angle
/// `theta` the cycle is
///
/// `offset(theta) + amplitude(theta) * shape(t)`, `t = j / samples_per_cycle`,
///
/// where `shape(t) = sum_h w_h sin(2 pi h t + phi_h) / sum_h |w_h|` lies in
/// `[-1, 1]`. Amplitude and offset are affine in `theta` with positive
/// slopes, and `offset >= amplitude` keeps the noiseless signal positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    pub amplitude_intercept: f64,
    pub amplitude_slope: f64,
    pub offset_intercept: f64,
    pub offset_slope: f64,
    /// `(weight, phase)` per harmonic, harmonic number = position + 1.
    pub harmonics: Vec<(f64, f64)>,
}

impl SignalModel {
    pub fn amplitude(&self, theta: f64) -> f64 {
        self.amplitude_intercept + self.amplitude_slope * theta
    }

    pub fn offset(&self, theta: f64) -> f64 {
        self.offset_intercept + self.offset_slope * theta
    }

    pub fn shape(&self, t: f64) -> f64 {
        let norm: f64 = self.harmonics.iter().map(|(w, _)| w.abs()).sum();
        if norm == 0.0 {
            return 0.0;
        }
        let tau = 2.0 * std::f64::consts::PI;
        self.harmonics
            .iter()
            .enumerate()
            .map(|(h, (w, phi))| w * (tau * (h + 1) as f64 * t + phi).sin())
            .sum::<f64>()
            / norm
    }

    /// Default models, in [`EffortSignalKind::ALL`] order.
    pub fn defaults() -> [SignalModel; 3] {
        [
            // ml_force, N
            SignalModel {
                amplitude_intercept: 20.0,
                amplitude_slope: 1.5,
                offset_intercept: 40.0,
                offset_slope: 2.0,
                harmonics: vec![(1.0, 0.0), (0.5, 0.7)],
            },
            // ap_torque, N*m
            SignalModel {
                amplitude_intercept: 5.0,
                amplitude_slope: 0.4,
                offset_intercept: 8.0,
                offset_slope: 0.5,
                harmonics: vec![(1.0, 0.3), (0.35, 1.1), (0.2, 2.0)],
            },
            // ml_torque, N*m
            SignalModel {
                amplitude_intercept: 3.0,
                amplitude_slope: 0.3,
                offset_intercept: 5.0,
                offset_slope: 0.35,
                harmonics: vec![(0.8, 1.5), (0.6, 0.0)],
            },
        ]
    }

    fn check(&self, kind: EffortSignalKind) -> Result<()> {
        let ok = self.amplitude_slope > 0.0
            && self.offset_slope > 0.0
            && self.amplitude_intercept >= 0.0
            && self.offset_intercept >= self.amplitude_intercept
            && self.offset_slope >= self.amplitude_slope
            && (1..=3).contains(&self.harmonics.len())
            && self.harmonics.iter().any(|(w, _)| *w != 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "signal model for {kind} must have positive slopes, offset >= amplitude and 1-3 non-zero harmonics"
            )))
        }
    }
}

/// Generates a cohort with the default [`SignalModel`]s.
pub fn synthesize_dataset(cfg: &SyntheticConfig) -> Result<Dataset> {
    synthesize_with_models(cfg, &SignalModel::defaults())
}

/// Generates a cohort. Draw order from one [`SplitMix64`] stream seeded with
/// `cfg.seed`: all participant angles first, then (when `noise_std > 0`) one
/// normal per sample in participant, signal, cycle, sample order.
pub fn synthesize_with_models(cfg: &SyntheticConfig, models: &[SignalModel; 3]) -> Result<Dataset> {
    cfg.validate()?;
    for (kind, m) in EffortSignalKind::ALL.into_iter().zip(models) {
        m.check(kind)?;
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let thetas: Vec<f64> = (0..cfg.n_participants)
        .map(|_| rng.uniform(cfg.angle_min_deg, cfg.angle_max_deg))
        .collect();
    let width = (cfg.n_participants.max(1)).to_string().len().max(3);

    let participants = thetas
        .iter()
        .enumerate()
        .map(|(i, &theta)| {
            let mut signals = BTreeMap::new();
            for (kind, model) in EffortSignalKind::ALL.into_iter().zip(models) {
                let amp = model.amplitude(theta);
                let off = model.offset(theta);
                let base: Vec<f64> = (0..cfg.samples_per_cycle)
                    .map(|j| off + amp * model.shape(j as f64 / cfg.samples_per_cycle as f64))
                    .collect();
                let cycles = (0..cfg.cycles)
                    .map(|c| {
                        let samples = base
                            .iter()
                            .map(|&v| {
                                if cfg.noise_std > 0.0 {
                                    v + cfg.noise_std * rng.standard_normal()
                                } else {
                                    v
                                }
                            })
                            .collect();
                        GaitCycleSeries {
                            cycle_index: c,
                            samples,
                        }
                    })
                    .collect();
                signals.insert(kind, cycles);
            }
            ParticipantRecord {
                id: format!("P{:0width$}", i + 1),
                cobb_angle_deg: theta,
                signals,
            }
        })
        .collect();

    Ok(Dataset {
        participants,
        cycles_per_participant: cfg.cycles,
    })
}
