//! `rfdl`: train, evaluate and benchmark the robust dictionary learners.
//!
//! Exit codes: 0 success, 2 config error, 3 data error, 4 numerical
//! failure (divergence), 5 stopped at `max_iter` without converging.

mod config;
mod experiment;
mod results;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use rfdl_core::classify::predict_batch;
use rfdl_core::data::{
    corrupt_pixels, load_matrix, occlude_block, save_matrix, synth_classes, write_atomic, write_labels,
    DatasetManifest, MatrixFormat, Normalization, SynthSpec,
};
use rfdl_core::{Error, Matrix, Model};
use serde_json::json;

use config::{config_error, ConfigError, ExperimentConfig, Overrides};
use experiment::{evaluate, load_dataset, plan_split, train, LoadedData};
use results::{ResultRecord, SplitRecord};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;
const EXIT_NOT_CONVERGED: u8 = 5;

#[derive(Parser)]
#[command(name = "rfdl", version, about = "Robust factorized dictionary learning experiments")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FileFormat {
    Csv,
    Raw,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Part {
    Train,
    Test,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled dataset and its manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        classes: usize,
        #[arg(long, default_value_t = 30)]
        features: usize,
        #[arg(long, default_value_t = 60)]
        per_class: usize,
        #[arg(long, default_value_t = 10.0)]
        separation: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FileFormat::Csv)]
        format: FileFormat,
    },
    /// Train one model on the first split and save it with its trace.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label new samples with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Dataset manifest to label.
        #[arg(long, conflicts_with = "features")]
        data: Option<PathBuf>,
        /// Raw feature matrix (CSV or RAWF64), samples in columns.
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy of a saved model on a dataset split.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        train_per_class: Option<usize>,
        #[arg(long, default_value_t = 0)]
        split_seed: u64,
        /// Defaults to `test` with a split and `all` without.
        #[arg(long, value_enum)]
        part: Option<Part>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and evaluate every (sweep point, split) pair.
    Bench {
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

/// The error chain without causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg = format!("{msg}: {text}");
        }
    }
    msg
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::InvalidParameter(_)) => EXIT_CONFIG,
        Some(
            Error::Diverged { .. } | Error::NonFinite(_) | Error::Singular { .. } | Error::DegenerateColumn { .. },
        ) => EXIT_NUMERIC,
        _ => EXIT_DATA,
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    let started = Instant::now();
    match command {
        Command::Synth { out, classes, features, per_class, separation, sigma, seed, format } => {
            let spec = SynthSpec { classes, features, per_class, separation, noise_sigma: sigma, seed };
            let ds = synth_classes(&spec).map_err(|e| config_error(e.to_string()))?;
            create_dir(&out)?;
            let (name, fmt) = match format {
                FileFormat::Csv => ("features.csv", MatrixFormat::Csv),
                FileFormat::Raw => ("features.bin", MatrixFormat::RawF64),
            };
            save_matrix(&out.join(name), ds.samples.x(), fmt)?;
            write_labels(&out.join("labels.txt"), &ds.labels)?;
            let manifest = DatasetManifest {
                features: name.into(),
                labels: "labels.txt".into(),
                classes,
                height: None,
                width: None,
                normalize: Normalization::None,
            };
            manifest.write(&out.join("manifest.json"))?;
            write_metadata(&out, "synth", started, json!({ "synth": spec }))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Train { overrides, out } => cmd_train(&overrides.build()?, &out, started),
        Command::Predict { model, data, features, out } => {
            cmd_predict(&model, data.as_deref(), features.as_deref(), &out, started)
        }
        Command::Eval { model, data, train_per_class, split_seed, part, out } => {
            let mut cfg = ExperimentConfig::new(data);
            cfg.split.train_per_class = train_per_class;
            cfg.split.seed = split_seed;
            cfg.validate()?;
            let part = part.unwrap_or(if train_per_class.is_some() { Part::Test } else { Part::All });
            cmd_eval(&model, &cfg, part, &out, started)
        }
        Command::Bench { overrides, out } => cmd_bench(&overrides.build()?, &out, started),
    }
}

fn create_dir(out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io { path: out.to_path_buf(), source: e })?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> anyhow::Result<()> {
    write_atomic(path, serde_json::to_string_pretty(value)?.as_bytes())?;
    Ok(())
}

/// `metadata.json`: command, software version, wall time and whatever the
/// command adds (config, seeds, dataset hash).
fn write_metadata(out: &Path, command: &str, started: Instant, extra: serde_json::Value) -> anyhow::Result<()> {
    let mut record = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    if let (Some(map), serde_json::Value::Object(extra)) = (record.as_object_mut(), extra) {
        map.extend(extra);
    }
    write_json(&out.join("metadata.json"), &record)
}

/// The config as it was run: dataset made absolute so the record can be
/// replayed from anywhere.
fn recorded_config(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    if let Ok(abs) = std::path::absolute(&cfg.dataset) {
        cfg.dataset = abs;
    }
    cfg
}

fn defaults_note() -> serde_json::Value {
    json!({
        "dict_size": "number of training samples unless set",
        "factor_rank": "min(2 * classes, training samples, features) unless set; a free parameter",
        "corruption": "uniform values in [min X, max X] (or salt-and-pepper) at floor(fraction * n) \
                       distinct pixels per sample, locations drawn independently per sample with seed ^ column; \
                       applied to the whole dataset with the split seed",
    })
}

fn cmd_train(cfg: &ExperimentConfig, out: &Path, started: Instant) -> anyhow::Result<ExitCode> {
    let LoadedData { dataset: ds, sha256 } = load_dataset(&cfg.dataset)?;
    let plan = plan_split(cfg, &ds, 0)?;
    let seed = cfg.params.seed.unwrap_or(0);
    let trained = train(cfg, &ds, ds.samples.x(), &plan.train, None, seed)?;
    create_dir(out)?;
    trained.model.save(&out.join("model.bin"))?;
    let mut trace_csv = Vec::new();
    trained.trace.write_csv(&mut trace_csv)?;
    write_atomic(&out.join("trace.csv"), &trace_csv)?;
    let converged = trained.trace.converged();
    let last = trained.trace.rows.last();
    write_json(
        &out.join("model.json"),
        &json!({
            "method": trained.model.method,
            "classes": trained.model.classes,
            "params": trained.params,
            "seed": seed,
            "dataset": recorded_config(cfg).dataset,
            "dataset_sha256": sha256,
            "split": { "train_per_class": cfg.split.train_per_class, "seed": plan.seed },
            "train_accuracy": trained.train_accuracy,
            "iterations": trained.trace.len(),
            "converged": converged,
            "final_residual": last.map(|r| r.res_max),
        }),
    )?;
    write_metadata(
        out,
        "train",
        started,
        json!({
            "config": recorded_config(cfg),
            "params": trained.params,
            "seed": seed,
            "dataset_sha256": sha256,
            "defaults": defaults_note(),
            "train_time_s": trained.train_time_s,
            "converged": converged,
        }),
    )?;
    if converged {
        Ok(ExitCode::SUCCESS)
    } else {
        log::warn!(
            "stopped at max_iter = {} with residual {:e}; model saved",
            trained.params.max_iter,
            last.map_or(f64::NAN, |r| r.res_max)
        );
        Ok(ExitCode::from(EXIT_NOT_CONVERGED))
    }
}

fn cmd_predict(
    model_path: &Path,
    data: Option<&Path>,
    features: Option<&Path>,
    out: &Path,
    started: Instant,
) -> anyhow::Result<ExitCode> {
    let model = Model::load(model_path)?;
    let raw: Matrix = match (data, features) {
        (Some(manifest), _) => load_dataset(manifest)?.dataset.samples.into_inner(),
        (None, Some(path)) => load_matrix(path, MatrixFormat::from_path(path))?,
        (None, None) => return Err(config_error("either --data or --features is required")),
    };
    let x = model.prepare(&raw)?;
    let predictions = predict_batch(&model, &x)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let classes = model.classes.unwrap_or(0);
    let mut header = vec!["sample".to_string(), "label".to_string()];
    header.extend((0..classes).map(|c| format!("score_{c}")));
    w.write_record(&header)?;
    for (j, p) in predictions.iter().enumerate() {
        let mut row = vec![j.to_string(), p.hard.to_string()];
        row.extend(p.soft.iter().map(|s| s.to_string()));
        w.write_record(&row)?;
    }
    create_dir(out)?;
    write_atomic(&out.join("predictions.csv"), &w.into_inner()?)?;
    write_metadata(out, "predict", started, json!({ "model": model_path, "samples": predictions.len() }))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(
    model_path: &Path,
    cfg: &ExperimentConfig,
    part: Part,
    out: &Path,
    started: Instant,
) -> anyhow::Result<ExitCode> {
    let model = Model::load(model_path)?;
    let LoadedData { dataset: ds, sha256 } = load_dataset(&cfg.dataset)?;
    let plan = plan_split(cfg, &ds, 0)?;
    let indices: Vec<usize> = match part {
        Part::Train => plan.train.clone(),
        Part::Test => plan.test.clone(),
        Part::All => (0..ds.labels.len()).collect(),
    };
    let test_started = Instant::now();
    let raw = ds.samples.select(&indices);
    let acc = evaluate(&model, &raw, &ds.select_labels(&indices))?;
    let record = SplitRecord {
        sweep: "none".into(),
        value: 0.0,
        split: 0,
        accuracy: Some(acc),
        train_time_s: 0.0,
        test_time_s: test_started.elapsed().as_secs_f64(),
        iterations: 0,
        converged: true,
        error: None,
    };
    create_dir(out)?;
    ResultRecord::from_splits(vec![record]).write(out, false)?;
    write_metadata(
        out,
        "eval",
        started,
        json!({
            "model": model_path,
            "config": recorded_config(cfg),
            "part": match part { Part::Train => "train", Part::Test => "test", Part::All => "all" },
            "dataset_sha256": sha256,
        }),
    )?;
    println!("accuracy {acc:.4} on {} samples", indices.len());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Clone, Copy)]
enum SweepPoint {
    Baseline,
    DictSize(usize),
    Corruption(f64),
    Occlusion(usize),
}

impl SweepPoint {
    fn label(self) -> (&'static str, f64) {
        match self {
            SweepPoint::Baseline => ("none", 0.0),
            SweepPoint::DictSize(k) => ("dict_size", k as f64),
            SweepPoint::Corruption(f) => ("corruption", f),
            SweepPoint::Occlusion(s) => ("occlusion", s as f64),
        }
    }
}

fn sweep_points(cfg: &ExperimentConfig) -> Vec<SweepPoint> {
    let s = &cfg.sweep;
    let mut points: Vec<SweepPoint> = s.dict_sizes.iter().map(|&k| SweepPoint::DictSize(k)).collect();
    points.extend(s.corruption.iter().map(|&f| SweepPoint::Corruption(f)));
    points.extend(s.occlusion.iter().map(|&b| SweepPoint::Occlusion(b)));
    if points.is_empty() {
        points.push(SweepPoint::Baseline);
    }
    points
}

fn run_job(cfg: &ExperimentConfig, ds: &rfdl_core::data::Dataset, point: SweepPoint, split: usize) -> SplitRecord {
    let (sweep, value) = point.label();
    let mut record = SplitRecord {
        sweep: sweep.into(),
        value,
        split,
        accuracy: None,
        train_time_s: 0.0,
        test_time_s: 0.0,
        iterations: 0,
        converged: false,
        error: None,
    };
    let result = (|| -> anyhow::Result<()> {
        let plan = plan_split(cfg, ds, split)?;
        let x = match point {
            SweepPoint::Corruption(f) => corrupt_pixels(ds.samples.x(), f, plan.seed, cfg.sweep.corruption_mode)?,
            SweepPoint::Occlusion(side) => occlude_block(ds.samples.x(), ds.samples.geometry(), side, plan.seed)?,
            SweepPoint::Baseline | SweepPoint::DictSize(_) => ds.samples.x().clone(),
        };
        let dict_size = match point {
            SweepPoint::DictSize(k) => Some(k),
            _ => None,
        };
        let seed = cfg.params.seed.unwrap_or(0) + split as u64;
        let trained = train(cfg, ds, &x, &plan.train, dict_size, seed)?;
        record.train_time_s = trained.train_time_s;
        record.iterations = trained.trace.len();
        record.converged = trained.trace.converged();
        let test_started = Instant::now();
        let acc = evaluate(&trained.model, &x.select_columns(&plan.test), &ds.select_labels(&plan.test))?;
        record.test_time_s = test_started.elapsed().as_secs_f64();
        record.accuracy = Some(acc);
        Ok(())
    })();
    if let Err(e) = result {
        log::warn!("{sweep}={value} split {split} failed: {e:#}");
        record.error = Some(format!("{e:#}"));
    }
    record
}

fn cmd_bench(cfg: &ExperimentConfig, out: &Path, started: Instant) -> anyhow::Result<ExitCode> {
    if cfg.split.train_per_class.is_none() {
        return Err(config_error("bench needs split.train_per_class (or --train-per-class)"));
    }
    let LoadedData { dataset: ds, sha256 } = load_dataset(&cfg.dataset)?;
    let points = sweep_points(cfg);
    let jobs: Vec<(SweepPoint, usize)> =
        points.iter().flat_map(|&p| (0..cfg.split.n_splits).map(move |s| (p, s))).collect();
    let records: Vec<SplitRecord> = jobs.par_iter().map(|&(p, s)| run_job(cfg, &ds, p, s)).collect();
    let failed = records.iter().filter(|r| r.error.is_some()).count();
    let results = ResultRecord::from_splits(records);
    create_dir(out)?;
    results.write(out, true).context("writing results")?;
    write_metadata(
        out,
        "bench",
        started,
        json!({
            "config": recorded_config(cfg),
            "seed": cfg.params.seed.unwrap_or(0),
            "split_seeds": (0..cfg.split.n_splits).map(|i| cfg.split.seed + i as u64).collect::<Vec<_>>(),
            "dataset_sha256": sha256,
            "defaults": defaults_note(),
            "jobs": jobs.len(),
            "failed_jobs": failed,
        }),
    )?;
    for a in &results.aggregates {
        match (a.mean, a.std, a.best) {
            (Some(m), Some(s), Some(b)) => println!(
                "{}={}: {:.2} ± {:.2} (best {:.2}, {} runs, {} failed)",
                a.sweep,
                a.value,
                100.0 * m,
                100.0 * s,
                100.0 * b,
                a.runs,
                a.failed
            ),
            _ => println!("{}={}: all {} runs failed", a.sweep, a.value, a.runs),
        }
    }
    Ok(ExitCode::SUCCESS)
}
