use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cobb_core::data::{parse_trials_csv, synthesize_dataset, trials_csv_string, SyntheticConfig, TRIAL_CSV_HEADER};
use cobb_core::evaluation::{
    benchmark, cross_validate_with, grid_search, Parallelism, ParamGrid, ReportFormat, RunHeader, ScalerMode,
};
use cobb_core::features::{build_matrix, features_csv_string, parse_features_csv, FeatureMatrix};
use cobb_core::persist::ModelBundle;
use cobb_core::regressors::{Algorithm, RegressorSpec};
use cobb_core::{Error, Result};
use serde_json::{json, Value};

const THREADS_ENV: &str = "COBB_BENCH_THREADS";

#[derive(Parser)]
#[command(name = "cobb-bench", version, about = "Cobb angle regression benchmark on gait-effort features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort as trial CSV.
    Synth {
        #[command(flatten)]
        config: SynthArgs,
        /// Overrides the generator seed from the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract the feature matrix as CSV.
    Features {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate one model.
    Cv {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Model name.
        #[arg(long)]
        models: String,
        /// JSON object overriding the model's default hyperparameters.
        #[arg(long)]
        params: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validate several models on shared folds.
    Benchmark {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated model names, or "all".
        #[arg(long, default_value = "all")]
        models: String,
        /// Report file; the summary table goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Cross-validate every combination of a hyperparameter grid.
    Gridsearch {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        run: RunArgs,
        /// JSON file: {"algorithm": name, "params": {key: [values]}}.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit one model on all rows and save it.
    Train {
        #[command(flatten)]
        input: InputArgs,
        /// Model name.
        #[arg(long)]
        models: String,
        #[arg(long)]
        params: Option<String>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict with a saved model.
    Predict {
        #[command(flatten)]
        input: InputArgs,
        /// Model file written by `train`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Config file (`key = value` lines), or "default".
    #[arg(long, default_value = "default")]
    synthetic_config: String,
}

#[derive(Args)]
struct InputArgs {
    /// Trial CSV or feature CSV.
    #[arg(long, conflicts_with = "synthetic_config")]
    input: Option<PathBuf>,
    /// Generate the data instead: config file, or "default".
    #[arg(long)]
    synthetic_config: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, value_enum, default_value_t = Scaler::PerFold)]
    scaler: Scaler,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scaler {
    PerFold,
    Global,
}

impl From<Scaler> for ScalerMode {
    fn from(s: Scaler) -> Self {
        match s {
            Scaler::PerFold => ScalerMode::PerFold,
            Scaler::Global => ScalerMode::Global,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Md,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => ReportFormat::Json,
            Format::Csv => ReportFormat::Csv,
            Format::Md => ReportFormat::Markdown,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            // clap's message spans lines; keep the part before the usage hint
            let text = e.to_string();
            let message: Vec<&str> = text
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty())
                .collect();
            eprintln!("E_USAGE: {}", message.join(" ").trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { config, seed, out } => {
            let mut cfg = load_synthetic_config(&config.synthetic_config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            emit(out.as_deref(), &trials_csv_string(&synthesize_dataset(&cfg)?)?)
        }
        Command::Features { input, out } => {
            let (fm, _) = load_matrix(&input)?;
            emit(out.as_deref(), &features_csv_string(&fm)?)
        }
        Command::Cv {
            input,
            run,
            models,
            params,
            out,
        } => {
            let (fm, desc) = load_matrix(&input)?;
            let spec = model_spec(&models, params.as_deref())?;
            let mode = run.scaler.into();
            let report = cross_validate_with(&fm, &spec, run.k, run.seed, mode, parallelism()?)?;
            let doc = json!({
                "header": RunHeader::new(&fm, run.k, run.seed, mode, desc),
                "report": report,
            });
            emit(out.as_deref(), &pretty(&doc))
        }
        Command::Benchmark {
            input,
            run,
            models,
            out,
            format,
        } => {
            let (fm, desc) = load_matrix(&input)?;
            let specs = roster(&models)?;
            let mut report = benchmark(&fm, &specs, run.k, run.seed, run.scaler.into(), parallelism()?)?;
            report.header.input = desc;
            match out {
                Some(path) => {
                    write_file(&path, &report.render(format.into()))?;
                    print!("{}", report.to_markdown());
                }
                None => print!("{}", report.render(format.into())),
            }
            Ok(())
        }
        Command::Gridsearch {
            input,
            run,
            grid,
            out,
        } => {
            let (fm, desc) = load_matrix(&input)?;
            let grid = ParamGrid::from_json(&read_file(&grid)?)?.expand()?;
            let mode = run.scaler.into();
            let result = grid_search(&fm, &grid, run.k, run.seed, mode, parallelism()?)?;
            let doc = json!({
                "header": RunHeader::new(&fm, run.k, run.seed, mode, desc),
                "result": result,
            });
            emit(out.as_deref(), &pretty(&doc))
        }
        Command::Train {
            input,
            models,
            params,
            seed,
            out,
        } => {
            let (fm, _) = load_matrix(&input)?;
            let spec = model_spec(&models, params.as_deref())?;
            let bundle = ModelBundle::train(&fm, &spec, seed)?;
            write_file(&out, &bundle.to_json()?)
        }
        Command::Predict { input, model, out } => {
            let bundle = ModelBundle::load(&model)?;
            let (fm, _) = load_matrix(&input)?;
            let expected = bundle.feature_names.len();
            if fm.width() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    got: fm.width(),
                });
            }
            let predictions = bundle.predict(&fm.rows)?;
            let mut text = String::from("participant_id,predicted_cobb_deg\n");
            for (id, p) in fm.ids.iter().zip(&predictions) {
                text.push_str(&format!("{id},{p}\n"));
            }
            emit(out.as_deref(), &text)
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Writes to `out`, or stdout when absent. Only called once the result is
/// complete, so a failed run leaves no partial file.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn load_synthetic_config(arg: &str) -> Result<SyntheticConfig> {
    if arg == "default" {
        return Ok(SyntheticConfig::default());
    }
    SyntheticConfig::from_kv_str(&read_file(Path::new(arg))?)
}

/// The feature matrix plus a description of where it came from, for report
/// headers.
fn load_matrix(args: &InputArgs) -> Result<(FeatureMatrix, Value)> {
    match (&args.input, &args.synthetic_config) {
        (Some(path), _) => {
            let text = read_file(path)?;
            let desc = json!({ "file": path.display().to_string() });
            if text.lines().next() == Some(TRIAL_CSV_HEADER) {
                Ok((build_matrix(&parse_trials_csv(&text)?)?, desc))
            } else {
                Ok((parse_features_csv(&text)?, desc))
            }
        }
        (None, Some(cfg)) => {
            let cfg = load_synthetic_config(cfg)?;
            let desc = json!({ "synthetic": serde_json::to_value(&cfg)? });
            Ok((build_matrix(&synthesize_dataset(&cfg)?)?, desc))
        }
        (None, None) => Err(Error::InvalidConfig(
            "one of --input or --synthetic-config is required".into(),
        )),
    }
}

/// Default spec for `name` with the keys of the `params` JSON object
/// replaced.
fn model_spec(name: &str, params: Option<&str>) -> Result<RegressorSpec> {
    let alg: Algorithm = name.trim().parse()?;
    let Some(params) = params else {
        return Ok(alg.default_spec());
    };
    let parsed: Value =
        serde_json::from_str(params).map_err(|e| Error::InvalidConfig(format!("--params: {e}")))?;
    let Value::Object(overrides) = parsed else {
        return Err(Error::InvalidConfig("--params must be a JSON object".into()));
    };
    let Value::Object(mut spec) = serde_json::to_value(alg.default_spec())? else {
        unreachable!("specs serialize to objects");
    };
    for (k, v) in overrides {
        if k == "algorithm" {
            return Err(Error::InvalidConfig("--params cannot change the algorithm".into()));
        }
        spec.insert(k, v);
    }
    let spec: RegressorSpec = serde_json::from_value(Value::Object(spec))
        .map_err(|e| Error::InvalidConfig(format!("--params: {e}")))?;
    spec.validate()?;
    Ok(spec)
}

fn roster(models: &str) -> Result<Vec<RegressorSpec>> {
    if models.trim() == "all" {
        return Ok(Algorithm::ALL.iter().map(|a| a.default_spec()).collect());
    }
    models
        .split(',')
        .map(|m| model_spec(m, None))
        .collect()
}

/// Worker threads from the environment; unset uses every core.
fn parallelism() -> Result<Parallelism> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Parallelism)
            .map_err(|_| Error::InvalidConfig(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(Parallelism(
            std::thread::available_parallelism().map_or(1, |n| n.get()),
        )),
    }
}
