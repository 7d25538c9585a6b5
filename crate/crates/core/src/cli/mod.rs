//! Command-line front end: evaluation, breakdowns, curves, splits and
//! simulation, each writing plain CSV/JSON files into `--out`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 some sequences failed,
//! 4 a wire-protocol peer failed.

mod engine;
mod spec;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::dataset::{read_dataset, write_dataset, DatasetEntry};
use crate::datamodel::{generate_splits, label_clips, split_stats, Attribute, SplitCondition};
use crate::metrics::report::{aggregate_csv, curve_csv, per_sequence_csv, summary_json, EvalFlags, Summary};
use crate::metrics::{aggregate, latency_profile, GroupKey, GSR_WINDOWS};
use crate::protocol::serialize_trace;
use crate::simgen::{simulate_dataset, DatasetConfig, NoiseConfig};

pub use engine::{evaluate_all, evaluate_entry, EvalOptions, SequenceOutcome};
pub use spec::{BackendSpec, ExternConfig, InitSpec, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SEQUENCE_FAILURES: i32 = 3;
pub const EXIT_PEER_FAILURE: i32 = 4;

/// Environment variable naming the default dataset directory.
pub const DATASET_ENV: &str = "SLOPETRACK_DATASET";

#[derive(Debug, Parser)]
#[command(name = "slopetrack", version, about = "Long-term single-target tracking evaluation on bounding-box streams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a backend on every sequence: per-sequence, grouped and summary reports.
    Evaluate(EvalArgs),
    /// Robustness curve over the recovery windows.
    Gsr(EvalArgs),
    /// Waiting-time curve under a single-worker queue.
    Latency(LatencyArgs),
    /// Clip attributes, and per-attribute scores when a backend is given.
    Attributes(EvalArgs),
    /// Train/test split by date, athlete or location.
    Split(SplitArgs),
    /// Write a synthetic dataset.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    /// Dataset directory with one sub-directory per sequence.
    #[arg(long, env = DATASET_ENV)]
    pub dataset: Option<PathBuf>,
    /// trace:DIR | sort[:DIR] | oracle[:SIGMA] | fusion:A,B | extern:CMD | extern:tcp:HOST:PORT
    #[arg(long)]
    pub backend: Option<String>,
    /// gt | detector[:DIR[:THR]]
    #[arg(long, default_value = "gt")]
    pub init: String,
    /// Leave occluded frames out of every score.
    #[arg(long)]
    pub exclude_occluded: bool,
    /// Overlap below which a frame counts as wrong for robustness.
    #[arg(long, default_value_t = 0.5)]
    pub gsr_iou: f64,
    /// Worker threads for sequence-level parallelism.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// TOML file with [fusion], [sort] and [extern] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LatencyArgs {
    #[command(flatten)]
    pub eval: EvalArgs,
    /// Use this per-frame processing time in seconds instead of measuring.
    #[arg(long)]
    pub simulated_cost: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long, env = DATASET_ENV)]
    pub dataset: Option<PathBuf>,
    #[arg(long, default_value = "date")]
    pub condition: SplitCondition,
    #[arg(long, default_value_t = 0.6)]
    pub fraction: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5)]
    pub videos: usize,
    #[arg(long, default_value_t = 300)]
    pub frames: usize,
    #[arg(long, default_value_t = 3)]
    pub max_cameras: u32,
    #[arg(long, default_value_t = 0.5)]
    pub occlusion_probability: f64,
    /// Detections equal to ground truth, score 1, no false positives.
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        EXIT_CONFIG
    }
}

fn config(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|source| CliError::Io { path: parent.into(), source })?;
    }
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.into(), source })
}

fn write_manifest(out: &Path, command: &str, args: &impl Serialize, extra: serde_json::Value) -> Result<(), CliError> {
    let m = serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
        "settings": extra,
    });
    write(&out.join("manifest.json"), serde_json::to_string_pretty(&m).expect("manifest is plain data"))
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn main_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Evaluate(a) => cmd_evaluate(&a),
        Command::Gsr(a) => cmd_gsr(&a),
        Command::Latency(a) => cmd_latency(&a),
        Command::Attributes(a) => cmd_attributes(&a),
        Command::Split(a) => cmd_split(&a),
        Command::Simulate(a) => cmd_simulate(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolved inputs shared by the evaluating commands.
struct Prepared {
    entries: Vec<DatasetEntry>,
    backend: BackendSpec,
    init: InitSpec,
    cfg: RunConfig,
    opts: EvalOptions,
}

fn load_dataset(dataset: &Option<PathBuf>) -> Result<Vec<DatasetEntry>, CliError> {
    let dir = dataset.as_ref().ok_or_else(|| config(format!("no dataset given; pass --dataset or set {DATASET_ENV}")))?;
    read_dataset(dir).map_err(config)
}

fn prepare(a: &EvalArgs, simulated_cost: Option<f64>) -> Result<Prepared, CliError> {
    let backend: BackendSpec = a.backend.as_deref().ok_or_else(|| config("--backend is required"))?.parse().map_err(config)?;
    backend.check().map_err(config)?;
    let init: InitSpec = a.init.parse().map_err(config)?;
    init.check().map_err(config)?;
    if !(0.0..=1.0).contains(&a.gsr_iou) {
        return Err(config(format!("--gsr-iou {} outside [0, 1]", a.gsr_iou)));
    }
    if let Some(p) = simulated_cost {
        if !(p.is_finite() && p >= 0.0) {
            return Err(config(format!("--simulated-cost {p} must be a non-negative number")));
        }
    }
    let cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            RunConfig::from_toml(&text).map_err(|e| config(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    let entries = load_dataset(&a.dataset)?;
    let opts = EvalOptions { include_occluded: !a.exclude_occluded, gsr_iou: a.gsr_iou, simulated_cost, seed: a.seed };
    Ok(Prepared { entries, backend, init, cfg, opts })
}

fn exit_for(outcomes: &[SequenceOutcome]) -> i32 {
    for o in outcomes.iter().filter(|o| o.result.failure.is_some()) {
        eprintln!("sequence {} failed: {}", o.result.id, o.result.failure.as_deref().unwrap_or(""));
    }
    if outcomes.iter().any(|o| o.peer_failure) {
        EXIT_PEER_FAILURE
    } else if outcomes.iter().any(|o| o.result.failure.is_some()) {
        EXIT_SEQUENCE_FAILURES
    } else {
        EXIT_OK
    }
}

fn settings(p: &Prepared) -> serde_json::Value {
    serde_json::json!({
        "backend": p.backend.to_string(),
        "init": p.init.to_string(),
        "config": p.cfg,
        "options": p.opts,
        "sequences": p.entries.iter().map(|e| e.video.id.clone()).collect::<Vec<_>>(),
    })
}

fn mean_gsr_curve(outcomes: &[SequenceOutcome]) -> Vec<(f64, f64)> {
    let n = outcomes.len().max(1) as f64;
    GSR_WINDOWS
        .iter()
        .enumerate()
        .map(|(i, &w)| (w as f64, outcomes.iter().map(|o| o.result.gsr.get(i).copied().unwrap_or(0.0)).sum::<f64>() / n))
        .collect()
}

pub fn cmd_evaluate(a: &EvalArgs) -> Result<i32, CliError> {
    let p = prepare(a, None)?;
    let outcomes = evaluate_all(&p.entries, &p.backend, &p.init, &p.cfg, &p.opts, a.jobs);
    let results: Vec<_> = outcomes.iter().map(|o| o.result.clone()).collect();
    let rows = aggregate(&results, &[GroupKey::Discipline, GroupKey::Weather, GroupKey::Attribute]).map_err(config)?;

    write(&a.out.join("per_sequence.csv"), per_sequence_csv(&results, &GSR_WINDOWS))?;
    write(&a.out.join("aggregate.csv"), aggregate_csv(&rows, &GSR_WINDOWS))?;
    write(&a.out.join("gsr_curve.csv"), curve_csv("window", "gsr", mean_gsr_curve(&outcomes)))?;
    let summary = Summary {
        flags: EvalFlags {
            backend: p.backend.to_string(),
            init: p.init.to_string(),
            include_occluded: p.opts.include_occluded,
            gsr_iou: p.opts.gsr_iou,
            gsr_windows: GSR_WINDOWS.to_vec(),
        },
        sequences: results.len(),
        failed_sequences: results.iter().filter(|r| r.failure.is_some()).map(|r| r.id.clone()).collect(),
        overall: rows[0].clone(),
        groups: rows[1..].to_vec(),
    };
    write(&a.out.join("summary.json"), summary_json(&summary))?;
    for o in &outcomes {
        if let Some(t) = &o.trace {
            write(&a.out.join("traces").join(format!("{}.csv", o.result.id)), serialize_trace(t))?;
        }
        if let Some(d) = &o.diagnostics {
            write(&a.out.join("diagnostics").join(format!("{}.json", o.result.id)), serde_json::to_string_pretty(d).expect("json"))?;
        }
    }
    write_manifest(&a.out, "evaluate", a, settings(&p))?;
    Ok(exit_for(&outcomes))
}

pub fn cmd_gsr(a: &EvalArgs) -> Result<i32, CliError> {
    let p = prepare(a, None)?;
    let outcomes = evaluate_all(&p.entries, &p.backend, &p.init, &p.cfg, &p.opts, a.jobs);
    write(&a.out.join("gsr_curve.csv"), curve_csv("window", "gsr", mean_gsr_curve(&outcomes)))?;
    let mut per = String::from("id");
    for w in GSR_WINDOWS {
        let _ = write!(per, ",gsr_{w}");
    }
    per.push('\n');
    for o in &outcomes {
        per.push_str(&o.result.id);
        for g in &o.result.gsr {
            let _ = write!(per, ",{g:.6}");
        }
        per.push('\n');
    }
    write(&a.out.join("gsr_per_sequence.csv"), per)?;
    write_manifest(&a.out, "gsr", a, settings(&p))?;
    Ok(exit_for(&outcomes))
}

/// Fractions of the sequence at which the latency curve is sampled.
fn latency_fractions() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

pub fn cmd_latency(a: &LatencyArgs) -> Result<i32, CliError> {
    let p = prepare(&a.eval, a.simulated_cost)?;
    let outcomes = evaluate_all(&p.entries, &p.backend, &p.init, &p.cfg, &p.opts, a.eval.jobs);
    let fractions = latency_fractions();
    let mut curve = vec![0.0; fractions.len()];
    let mut per = String::from("id,fps,mean_delay,max_delay,makespan,delay_50,delay_90,delay_99\n");
    let mut counted = 0usize;
    for o in outcomes.iter().filter(|o| o.trace.is_some()) {
        let prof = latency_profile(&o.frame_costs, o.fps).map_err(config)?;
        let n = prof.delay.len().max(1) as f64;
        let mean = prof.delay.iter().sum::<f64>() / n;
        let max = prof.delay.iter().copied().fold(0.0, f64::max);
        let q = prof.delay_at_fractions(&[0.5, 0.9, 0.99]);
        let _ = writeln!(per, "{},{},{mean:.6},{max:.6},{:.6},{:.6},{:.6},{:.6}", o.result.id, o.fps, prof.makespan(), q[0], q[1], q[2]);
        for (c, d) in curve.iter_mut().zip(prof.delay_at_fractions(&fractions)) {
            *c += d;
        }
        counted += 1;
    }
    let denom = counted.max(1) as f64;
    write(&a.eval.out.join("latency_curve.csv"), curve_csv("fraction", "delay", fractions.iter().zip(&curve).map(|(&f, &d)| (f, d / denom))))?;
    write(&a.eval.out.join("latency_per_sequence.csv"), per)?;
    write_manifest(&a.eval.out, "latency", a, settings(&p))?;
    Ok(exit_for(&outcomes))
}

pub fn cmd_attributes(a: &EvalArgs) -> Result<i32, CliError> {
    let entries = load_dataset(&a.dataset)?;
    let mut clips = String::from("id,camera_id,start,end,frames");
    for attr in Attribute::ALL {
        let _ = write!(clips, ",{}", attr.code());
    }
    clips.push('\n');
    for e in &entries {
        for c in label_clips(&e.video).map_err(config)? {
            let _ = write!(clips, "{},{},{},{},{}", c.video_id, c.camera_id, c.start, c.end, c.len());
            for attr in Attribute::ALL {
                let _ = write!(clips, ",{}", u8::from(c.attributes.has(attr)));
            }
            clips.push('\n');
        }
    }
    write(&a.out.join("clips.csv"), clips)?;
    if a.backend.is_none() {
        write_manifest(&a.out, "attributes", a, serde_json::Value::Null)?;
        return Ok(EXIT_OK);
    }
    let p = prepare(a, None)?;
    let outcomes = evaluate_all(&p.entries, &p.backend, &p.init, &p.cfg, &p.opts, a.jobs);
    let results: Vec<_> = outcomes.iter().map(|o| o.result.clone()).collect();
    let rows = aggregate(&results, &[GroupKey::Attribute]).map_err(config)?;
    let mut out = String::from("attribute,sequences,precision,recall,fscore\n");
    for r in rows.iter().filter(|r| r.kind == GroupKey::Attribute) {
        let _ = writeln!(out, "{},{},{:.6},{:.6},{:.6}", r.group, r.sequences, r.precision, r.recall, r.fscore);
    }
    write(&a.out.join("attribute_scores.csv"), out)?;
    write_manifest(&a.out, "attributes", a, settings(&p))?;
    Ok(exit_for(&outcomes))
}

pub fn cmd_split(a: &SplitArgs) -> Result<i32, CliError> {
    if !(a.fraction > 0.0 && a.fraction < 1.0) {
        return Err(config(format!("--fraction {} outside (0, 1)", a.fraction)));
    }
    let entries = load_dataset(&a.dataset)?;
    let videos: Vec<_> = entries.into_iter().map(|e| e.video).collect();
    let split = generate_splits(&videos, a.condition, a.fraction).map_err(config)?;
    let stats = split_stats(&videos, &split).map_err(config)?;
    let doc = serde_json::json!({ "condition": a.condition, "fraction": a.fraction, "train": split.train, "test": split.test, "stats": stats });
    write(&a.out.join(format!("split_{}.json", a.condition)), serde_json::to_string_pretty(&doc).expect("json"))?;
    write(&a.out.join("train.txt"), split.train.iter().map(|s| format!("{s}\n")).collect::<String>())?;
    write(&a.out.join("test.txt"), split.test.iter().map(|s| format!("{s}\n")).collect::<String>())?;
    write_manifest(&a.out, "split", a, serde_json::Value::Null)?;
    Ok(EXIT_OK)
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<i32, CliError> {
    let cfg = DatasetConfig {
        videos: a.videos,
        frames: a.frames,
        max_cameras: a.max_cameras,
        occlusion_probability: a.occlusion_probability,
        noise: if a.noiseless { NoiseConfig::noiseless() } else { NoiseConfig::default() },
        seed: a.seed,
        ..DatasetConfig::default()
    };
    let entries = simulate_dataset(&cfg).map_err(config)?;
    write_dataset(&a.out, &entries).map_err(config)?;
    write_manifest(&a.out, "simulate", a, serde_json::to_value(&cfg).expect("json"))?;
    Ok(EXIT_OK)
}
