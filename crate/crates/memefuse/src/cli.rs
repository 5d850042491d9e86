//! Command-line entry points.
//!
//! Exit codes: 0 success, 2 configuration, 3 training failure, 4 data
//! validation, 5 undefined metric. Anything else (1) is an I/O failure
//! writing outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use memefuse_core::fusion::{FusionConfig, FusionMode};
use memefuse_core::synth::{self, MemeType};
use memefuse_core::train::{self, EpochLog};
use memefuse_core::{
    ChannelKind, Dataset, EmbeddingRecord, EvalReport, MetricError, Model, ModelError, Split, SynthConfig, TrainError,
};
use serde::Serialize;

use crate::config::{ConfigError, RunConfig};
use crate::exec::PoolExecutor;
use crate::format::{checkpoint, report};
use crate::store::{self, DatasetPaths, StoreError};

pub const CHECKPOINT_FILE: &str = "model.mfm";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";

#[derive(Debug, Parser)]
#[command(
    name = "memefuse",
    version,
    about = "Late-fusion hateful meme classifier over precomputed embeddings"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset into [dataset].dir (or --out).
    GenSynth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a dataset and print its composition.
    Inspect {
        /// Dataset directory.
        dir: Option<PathBuf>,
        #[arg(long, conflicts_with = "dir")]
        config: Option<PathBuf>,
    },
    /// Train and write a checkpoint plus per-epoch log into [output].dir (or --out).
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a labeled split and write the report.
    Evaluate {
        #[command(flatten)]
        target: Target,
        /// Directory for the report files.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print `id,p_hat,label_hat` rows for a split in manifest order.
    Predict {
        #[command(flatten)]
        target: Target,
        /// Also write the rows to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct Target {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, required_unless_present = "dataset")]
    pub config: Option<PathBuf>,
    /// Dataset directory, instead of the config's.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_parser = parse_split)]
    pub split: Split,
    /// Decision threshold, overriding [metrics].threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
}

fn parse_split(s: &str) -> Result<Split, String> {
    Split::parse(s).ok_or_else(|| format!("unknown split {s:?}; expected train, val or test"))
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub const IO: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const TRAINING: u8 = 3;
    pub const DATA: u8 = 4;
    pub const METRIC: u8 = 5;

    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(CliError::CONFIG, e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::new(CliError::DATA, e.to_string())
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        let code = match e {
            ModelError::Fusion(_) | ModelError::MissingLabel { .. } => CliError::DATA,
            _ => CliError::TRAINING,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        let code = match e {
            MetricError::Undefined(_) => CliError::METRIC,
            _ => CliError::DATA,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Model(m) => m.into(),
            TrainError::Divergence { .. } => CliError::new(CliError::TRAINING, e.to_string()),
            // The config itself was validated on load; what is left are split problems.
            TrainError::Config(_) => CliError::new(CliError::DATA, e.to_string()),
        }
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::new(CliError::IO, format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::new(CliError::IO, format!("{}: {e}", path.display())))
}

fn executor() -> Result<PoolExecutor, CliError> {
    PoolExecutor::from_env().map_err(|m| CliError::new(CliError::CONFIG, m))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenSynth { config, seed, out } => gen_synth(&config, seed, out),
        Command::Inspect { dir, config } => inspect(dir, config),
        Command::Train { config, seed, out } => train_cmd(&config, seed, out),
        Command::Evaluate { target, out } => evaluate(&target, out),
        Command::Predict { target, out } => predict(&target, out),
    }
}

/// Parses arguments, runs, reports errors on stderr and maps them to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::CONFIG)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn composition_text(c: &synth::Composition) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "records {}", c.total);
    for split in Split::ALL {
        let s = c.by_split.get(&split).copied().unwrap_or_default();
        let _ = writeln!(
            out,
            "split {:<5} total {:>6}  positive {:>6}  negative {:>6}  unlabeled {:>6}",
            split.as_str(),
            s.total,
            s.positive,
            s.negative,
            s.unlabeled
        );
    }
    for ty in MemeType::ALL {
        let _ = writeln!(
            out,
            "type {:<24} {:>6}",
            ty.as_str(),
            c.by_type.get(&ty).copied().unwrap_or(0)
        );
    }
    out
}

fn gen_synth(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let cfg = RunConfig::load(config)?;
    let mut synth_cfg: SynthConfig = cfg.synth.clone().unwrap_or_default();
    if let Some(seed) = seed {
        synth_cfg.seed = seed;
    }
    let dir = out.or_else(|| cfg.dataset_dir()).ok_or_else(|| {
        CliError::new(
            CliError::CONFIG,
            "config field `dataset.dir`: gen-synth needs an output directory",
        )
    })?;
    let ds = synth::generate(&synth_cfg).map_err(|e| match e {
        memefuse_core::SynthError::Config { field, reason } => {
            CliError::new(CliError::CONFIG, format!("config field `synth.{field}`: {reason}"))
        }
        other => CliError::new(CliError::DATA, other.to_string()),
    })?;
    store::write_synth(&dir, &ds).map_err(|e| match e {
        StoreError::Io { .. } => CliError::new(CliError::IO, e.to_string()),
        other => other.into(),
    })?;
    println!("wrote {}", dir.display());
    print!("{}", composition_text(&synth::describe(&ds.entries, &ds.tags)));
    Ok(())
}

fn inspect(dir: Option<PathBuf>, config: Option<PathBuf>) -> Result<(), CliError> {
    let paths = match (dir, config) {
        (Some(dir), _) => {
            let paths = DatasetPaths::in_dir(&dir);
            if !paths.manifest.is_file() {
                return Err(CliError::new(
                    CliError::CONFIG,
                    format!("{} does not exist", paths.manifest.display()),
                ));
            }
            paths
        }
        (None, Some(config)) => RunConfig::load(&config)?.dataset_paths()?,
        (None, None) => {
            return Err(CliError::new(
                CliError::CONFIG,
                "inspect needs a dataset directory or --config",
            ))
        }
    };
    let summary = store::inspect(&paths)?;
    println!("ok {}", paths.manifest.display());
    for (kind, (dim, count)) in &summary.channels {
        println!("channel {:<8} dim {:>6}  rows {:>8}", kind.as_str(), dim, count);
    }
    print!("{}", composition_text(&summary.composition));
    if !summary.tagged {
        println!("no type tags");
    }
    Ok(())
}

/// Builds the fusion config from the dataset headers, checking that every
/// record in `records` carries the channels the mode reads.
fn fusion_for(
    mode: FusionMode,
    bilinear_dim: usize,
    dataset: &Dataset,
    records: &[&EmbeddingRecord],
) -> Result<FusionConfig, CliError> {
    let defaults = FusionConfig::default();
    for kind in mode.required_channels() {
        if dataset.dim(kind).is_none() {
            return Err(CliError::new(
                CliError::DATA,
                format!("mode {mode} needs channel {kind}, which the dataset does not provide"),
            ));
        }
        if let Some(r) = records.iter().find(|r| r.channel(kind).is_none()) {
            return Err(CliError::new(
                CliError::DATA,
                format!("entry {:?}: mode {mode} needs channel {kind}", r.id),
            ));
        }
    }
    let fusion = FusionConfig {
        mode,
        d_m: dataset.dim(ChannelKind::Mm).unwrap_or(defaults.d_m),
        d_h: dataset.dim(ChannelKind::Cap).unwrap_or(defaults.d_h),
        bilinear_dim,
        k: dataset.dim(ChannelKind::SentiT).unwrap_or(defaults.k),
    };
    if mode.uses_sentiment() && dataset.dim(ChannelKind::SentiV) != Some(fusion.k) {
        return Err(CliError::new(
            CliError::DATA,
            format!(
                "senti_t has {} classes but senti_v has {:?}",
                fusion.k,
                dataset.dim(ChannelKind::SentiV)
            ),
        ));
    }
    Ok(fusion)
}

#[derive(Serialize)]
struct LogLine<'a> {
    #[serde(flatten)]
    epoch: &'a EpochLog,
    best: bool,
}

pub fn render_train_log(log: &memefuse_core::TrainLog) -> String {
    let mut out = String::new();
    for e in &log.epochs {
        let line = LogLine {
            epoch: e,
            best: e.epoch == log.best_epoch,
        };
        out.push_str(&serde_json::to_string(&line).expect("log lines serialize"));
        out.push('\n');
    }
    out
}

fn train_cmd(config: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(seed) = seed {
        cfg.train.seed = seed;
    }
    let out_dir = out.or_else(|| cfg.output_dir()).ok_or_else(|| {
        CliError::new(
            CliError::CONFIG,
            "config field `output.dir`: train needs an output directory",
        )
    })?;
    let exec = executor()?;
    let paths = cfg.dataset_paths()?;
    let dataset = store::load_dataset(&paths.manifest, &paths.channels)?;
    let train_split = dataset.split(Split::Train);
    let val_split = dataset.split(Split::Val);
    let mut used = train_split.clone();
    used.extend(&val_split);
    let fusion = fusion_for(cfg.fusion.mode, cfg.fusion.bilinear_dim, &dataset, &used)?;

    let (model, log) = train::train_with(&train_split, &val_split, &fusion, &cfg.train, &exec)?;
    for e in &log.epochs {
        eprintln!(
            "epoch {:>3}  train_loss {:.6}  train_acc {:.4}  val_loss {:.6}  val_acc {:.4}  val_auc {:.4}",
            e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy, e.val_auc_roc
        );
    }
    write_file(&out_dir.join(CHECKPOINT_FILE), &checkpoint::encode(&model))?;
    write_file(&out_dir.join(TRAIN_LOG_FILE), render_train_log(&log).as_bytes())?;
    println!("mode={}", fusion.mode);
    println!("epochs={}", log.epochs.len());
    println!("best_epoch={}", log.best_epoch);
    println!("best_val_auc_roc={}", log.best_val_auc_roc);
    println!("checkpoint={}", out_dir.join(CHECKPOINT_FILE).display());
    Ok(())
}

struct Loaded {
    model: Model,
    dataset: Dataset,
    threshold: f64,
    out_dir: Option<PathBuf>,
}

fn load_target(target: &Target) -> Result<Loaded, CliError> {
    let cfg = match &target.config {
        Some(p) => Some(RunConfig::load(p)?),
        None => None,
    };
    let paths = match (&target.dataset, &cfg) {
        (Some(dir), _) => {
            let paths = DatasetPaths::in_dir(dir);
            if !paths.manifest.is_file() {
                return Err(CliError::new(
                    CliError::CONFIG,
                    format!("{} does not exist", paths.manifest.display()),
                ));
            }
            paths
        }
        (None, Some(cfg)) => cfg.dataset_paths()?,
        (None, None) => unreachable!("clap requires --config or --dataset"),
    };
    let bytes = fs::read(&target.checkpoint)
        .map_err(|e| CliError::new(CliError::CONFIG, format!("{}: {e}", target.checkpoint.display())))?;
    let model = checkpoint::decode(&bytes)
        .map_err(|e| CliError::new(CliError::DATA, format!("{}: {e}", target.checkpoint.display())))?;
    let dataset = store::load_dataset(&paths.manifest, &paths.channels)?;
    let threshold = target
        .threshold
        .or(cfg.as_ref().map(|c| c.metrics.threshold))
        .unwrap_or(0.5);
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::new(CliError::CONFIG, "threshold must lie in [0, 1]"));
    }
    Ok(Loaded {
        model,
        dataset,
        threshold,
        out_dir: cfg.and_then(|c| c.output_dir()),
    })
}

fn check_compatible(model: &Model, dataset: &Dataset, records: &[&EmbeddingRecord]) -> Result<(), CliError> {
    let f = model.fusion();
    let expected = fusion_for(f.mode, f.bilinear_dim, dataset, records)?;
    let mut needed = vec![(ChannelKind::Mm, f.d_m, expected.d_m)];
    if f.mode.uses_caption() {
        needed.push((ChannelKind::Cap, f.d_h, expected.d_h));
    }
    if f.mode.uses_sentiment() {
        needed.push((ChannelKind::SentiT, f.k, expected.k));
    }
    for (kind, want, have) in needed {
        if want != have {
            return Err(CliError::new(
                CliError::DATA,
                format!("checkpoint expects {kind} dim {want}, dataset has {have}"),
            ));
        }
    }
    Ok(())
}

fn evaluate(target: &Target, out: Option<PathBuf>) -> Result<(), CliError> {
    let loaded = load_target(target)?;
    let exec = executor()?;
    let records = loaded.dataset.split(target.split);
    check_compatible(&loaded.model, &loaded.dataset, &records)?;
    let labels = records
        .iter()
        .map(|r| {
            r.label.ok_or_else(|| {
                CliError::new(
                    CliError::DATA,
                    format!("entry {:?}: {} split is unlabeled", r.id, target.split),
                )
            })
        })
        .collect::<Result<Vec<u8>, _>>()?;
    let preds = train::predict_all(&loaded.model, &records, loaded.threshold, &exec)?;
    let scores: Vec<f64> = preds.iter().map(|p| p.p_hat).collect();
    let eval = EvalReport::from_scores(&scores, &labels, loaded.threshold)?;
    let text = report::render_report(&eval, target.split.as_str());
    print!("{text}");

    let dir = out
        .or(loaded.out_dir)
        .unwrap_or_else(|| target.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default());
    write_file(&dir.join(format!("eval_{}.txt", target.split)), text.as_bytes())?;
    write_file(
        &dir.join(format!("roc_{}.csv", target.split)),
        report::render_roc(&eval.roc_points).as_bytes(),
    )?;
    Ok(())
}

fn predict(target: &Target, out: Option<PathBuf>) -> Result<(), CliError> {
    let loaded = load_target(target)?;
    let exec = executor()?;
    let records = loaded.dataset.split(target.split);
    check_compatible(&loaded.model, &loaded.dataset, &records)?;
    let preds = train::predict_all(&loaded.model, &records, loaded.threshold, &exec)?;
    let mut text = String::new();
    for (r, p) in records.iter().zip(&preds) {
        text.push_str(&report::prediction_row(&r.id, p));
        text.push('\n');
    }
    print!("{text}");
    if let Some(path) = out {
        write_file(&path, text.as_bytes())?;
    }
    Ok(())
}
