//! The `ecct` command line.
//!
//! Every subcommand can take its options from a TOML file given with
//! `--config`. Keys are the long flag names with `-` replaced by `_`, either
//! at the top level or in a table named after the subcommand
//! (`[train]`, `[bp-eval]`, ...); values from the file override flags.
//! Commands that write into `--out` also save the fully resolved options
//! there as `resolved_config.toml`.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on runtime failures.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::construct::builtin;
use crate::code::{parse_alist, BinaryMatrix, LinearCode};
use crate::eval::{
    curve_data, dump_attention, emit_report, run_ber, BpDecoder, CodewordSource, Decoder, EcctDecoder, EvalConfig,
    EvalReport, HardDecision, MlDecoder, ReportFormat,
};
use crate::invariant::preprocess;
use crate::mask::{build_mask, mask_stats, AttentionMask};
use crate::model::{smoothed, AttnScale, Checkpoint, MaskMode, ModelConfig, SnrSampling, TrainSchedule, Trainer};

/// Environment variable consulted when `--seed` is absent.
pub const SEED_ENV: &str = "ECCT_SEED";
pub const RESOLVED_CONFIG: &str = "resolved_config.toml";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{stage}: {message}")]
    Runtime { stage: &'static str, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime { .. } => 2,
        }
    }
}

fn runtime(stage: &'static str) -> impl FnOnce(String) -> CliError {
    move |message| CliError::Runtime { stage, message }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, CliError>;
}

impl<T, E: std::fmt::Display> Stage<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Result<T, CliError> {
        self.map_err(|e| runtime(stage)(e.to_string()))
    }
}

#[derive(Debug, Parser)]
#[command(name = "ecct", version, about = "Transformer decoding of binary linear codes")]
struct Cli {
    /// TOML file whose values override command-line flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a decoder and write a checkpoint plus loss history.
    Train(TrainArgs),
    /// Measure BER/FER of any decoder over a list of SNRs.
    Eval(EvalArgs),
    /// Shortcut for `eval --decoder bp`.
    BpEval(BpEvalArgs),
    /// Shortcut for `eval --decoder ml` (small codes only).
    MlEval(MlEvalArgs),
    /// Attention-mask sparsity figures for a code.
    MaskStats(MaskStatsArgs),
    /// Post-softmax attention map of one head for one received word.
    AttnDump(AttnDumpArgs),
    /// Summary of a checkpoint file.
    CkptInfo(CkptInfoArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum MaskArg {
    Code,
    Unmasked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
enum ScaleArg {
    /// sqrt(d)
    D,
    /// sqrt(d / h)
    #[value(name = "d_h")]
    DH,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum SnrModeArg {
    Integer,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum DecoderArg {
    Ecct,
    Bp,
    Ml,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum SourceArg {
    Zero,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
enum FormatArg {
    Table,
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct TrainArgs {
    /// Built-in code name or path to an alist file.
    #[arg(long)]
    code: String,
    /// Decoder layers N.
    #[arg(long, default_value_t = 2)]
    layers: usize,
    /// Embedding dimension d.
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    heads: usize,
    #[arg(long, value_enum, default_value_t = MaskArg::Code)]
    mask: MaskArg,
    #[arg(long, value_enum, default_value_t = ScaleArg::DH)]
    attn_scale: ScaleArg,
    #[arg(long, default_value_t = 100)]
    epochs: u64,
    #[arg(long, default_value_t = 200)]
    minibatches: u64,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, value_enum, default_value_t = SnrModeArg::Integer)]
    snr_mode: SnrModeArg,
    #[arg(long, default_value_t = 3.0)]
    snr_low: f64,
    #[arg(long, default_value_t = 7.0)]
    snr_high: f64,
    #[arg(long, default_value_t = crate::diffnum::LR_START)]
    lr_start: f64,
    #[arg(long, default_value_t = crate::diffnum::LR_END)]
    lr_end: f64,
    /// Falls back to $ECCT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from this checkpoint instead of initializing.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Print progress every this many steps (0 disables).
    #[arg(long, default_value_t = 200)]
    log_every: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct EvalOptions {
    /// Eb/N0 points in dB, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    snr: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    min_frames: u64,
    #[arg(long, default_value_t = 500)]
    min_errors: u64,
    #[arg(long, default_value_t = 10_000_000)]
    max_frames: u64,
    #[arg(long, default_value_t = 2_000)]
    batch_frames: usize,
    #[arg(long, value_enum, default_value_t = SourceArg::Random)]
    source: SourceArg,
    /// Concurrent batches; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = FormatArg::Table)]
    format: FormatArg,
    /// Directory for report.{json,csv,txt}, curve.dat and the resolved config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct EvalArgs {
    #[arg(long, value_enum, default_value_t = DecoderArg::Ecct)]
    decoder: DecoderArg,
    /// Checkpoint (required for the ecct decoder).
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Code name or alist path (baseline decoders).
    #[arg(long)]
    code: Option<String>,
    /// BP iterations L.
    #[arg(long, default_value_t = 5)]
    iters: usize,
    /// Run all L iterations even after the syndrome clears.
    #[arg(long)]
    no_early_stop: bool,
    #[command(flatten)]
    #[serde(flatten)]
    opts: EvalOptions,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct BpEvalArgs {
    #[arg(long)]
    code: String,
    #[arg(long, default_value_t = 5)]
    iters: usize,
    #[arg(long)]
    no_early_stop: bool,
    #[command(flatten)]
    #[serde(flatten)]
    opts: EvalOptions,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct MlEvalArgs {
    #[arg(long)]
    code: String,
    #[command(flatten)]
    #[serde(flatten)]
    opts: EvalOptions,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct MaskStatsArgs {
    #[arg(long)]
    code: String,
    /// Also include the mask as rows of '#' (allowed) and '.' (denied).
    #[arg(long)]
    grid: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct AttnDumpArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 0)]
    layer: usize,
    #[arg(long, default_value_t = 0)]
    head: usize,
    /// Key position whose column is reported separately.
    #[arg(long, default_value_t = 0)]
    column: usize,
    /// Received word, comma separated. Defaults to the noiseless zero
    /// codeword.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    y: Vec<f64>,
    /// Negate these positions of the received word first.
    #[arg(long, value_delimiter = ',')]
    corrupt: Vec<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
struct CkptInfoArgs {
    #[arg(long)]
    checkpoint: PathBuf,
}

/// Resolves a code argument: existing alist path first, then built-in
/// name (an `.alist` suffix is ignored), then `codes/<name>`.
pub fn load_code(spec: &str) -> Result<LinearCode, String> {
    let from_file = |path: &Path| -> Result<LinearCode, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let h: BinaryMatrix = parse_alist(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| spec.to_string());
        LinearCode::from_parity(name, h).map_err(|e| format!("{}: {e}", path.display()))
    };
    let path = Path::new(spec);
    if path.is_file() {
        return from_file(path);
    }
    let bare = spec.strip_suffix(".alist").unwrap_or(spec);
    if let Ok(code) = builtin(bare) {
        return Ok(code);
    }
    let shipped = Path::new("codes").join(path.file_name().unwrap_or_default());
    if shipped.is_file() {
        return from_file(&shipped);
    }
    Err(format!("unknown code '{spec}' (not a file and not a built-in name)"))
}

fn resolve_seed(seed: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{SEED_ENV}='{v}' is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

/// Overlays values from the config file on top of parsed flags.
fn apply_config<T: Serialize + DeserializeOwned>(args: T, file: Option<&Path>, section: &str) -> Result<T, CliError> {
    let Some(path) = file else {
        return Ok(args);
    };
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let overrides: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let mut merged = toml::Table::try_from(&args).map_err(|e| CliError::Usage(e.to_string()))?;
    let known: Vec<String> = merged.keys().cloned().collect();
    let mut overlay = |table: &toml::Table| -> Result<(), CliError> {
        for (key, value) in table {
            if value.is_table() && !known.contains(key) {
                continue;
            }
            let key = key.replace('-', "_");
            if !known.contains(&key) && !is_optional_key(&key) {
                return Err(CliError::Usage(format!(
                    "{}: unknown key '{key}' for {section}",
                    path.display()
                )));
            }
            merged.insert(key, value.clone());
        }
        Ok(())
    };
    overlay(&overrides)?;
    if let Some(toml::Value::Table(t)) = overrides.get(section) {
        overlay(t)?;
    }
    toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Keys of `Option` fields, absent from the serialized table when unset.
fn is_optional_key(key: &str) -> bool {
    matches!(key, "seed" | "resume" | "checkpoint" | "code" | "out")
}

fn write_resolved<T: Serialize>(dir: &Path, section: &str, args: &T, seed: u64) -> Result<(), CliError> {
    let mut table = toml::Table::try_from(args).stage("resolved config")?;
    table.insert("seed".into(), toml::Value::Integer(seed as i64));
    let mut root = toml::Table::new();
    root.insert(section.into(), toml::Value::Table(table));
    let text = toml::to_string_pretty(&root).stage("resolved config")?;
    fs::write(dir.join(RESOLVED_CONFIG), text).stage("resolved config")
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// normal output to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() {
                write!(err, "{}", e.render())
            } else {
                write!(out, "{}", e.render())
            };
            return code;
        }
    };
    match dispatch(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::Train(a) => train(apply_config(a, config, "train")?, out, err),
        Command::Eval(a) => eval(apply_config(a, config, "eval")?, out),
        Command::BpEval(a) => {
            let a = apply_config(a, config, "bp-eval")?;
            eval(
                EvalArgs {
                    decoder: DecoderArg::Bp,
                    checkpoint: None,
                    code: Some(a.code),
                    iters: a.iters,
                    no_early_stop: a.no_early_stop,
                    opts: a.opts,
                },
                out,
            )
        }
        Command::MlEval(a) => {
            let a = apply_config(a, config, "ml-eval")?;
            eval(
                EvalArgs {
                    decoder: DecoderArg::Ml,
                    checkpoint: None,
                    code: Some(a.code),
                    iters: 0,
                    no_early_stop: false,
                    opts: a.opts,
                },
                out,
            )
        }
        Command::MaskStats(a) => mask_stats_cmd(apply_config(a, config, "mask-stats")?, out),
        Command::AttnDump(a) => attn_dump(apply_config(a, config, "attn-dump")?, out),
        Command::CkptInfo(a) => ckpt_info(apply_config(a, config, "ckpt-info")?, out),
    }
}

fn print(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).stage("output")
}

fn train(a: TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let seed = resolve_seed(a.seed)?;
    let mut trainer = if let Some(path) = &a.resume {
        let ckpt = Checkpoint::load(path).stage("load checkpoint")?;
        Trainer::from_checkpoint(&ckpt).stage("resume")?
    } else {
        let code = load_code(&a.code).map_err(CliError::Usage)?;
        let config = ModelConfig::new(&code, a.layers, a.dim)
            .with_heads(a.heads)
            .with_mask_mode(match a.mask {
                MaskArg::Code => MaskMode::Code,
                MaskArg::Unmasked => MaskMode::Unmasked,
            })
            .with_attn_scale(match a.attn_scale {
                ScaleArg::D => AttnScale::Model,
                ScaleArg::DH => AttnScale::Head,
            });
        config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let schedule = TrainSchedule {
            epochs: a.epochs,
            minibatches_per_epoch: a.minibatches,
            batch_size: a.batch,
            snr: match a.snr_mode {
                SnrModeArg::Integer => SnrSampling::Integers {
                    low: a.snr_low.round() as i32,
                    high: a.snr_high.round() as i32,
                },
                SnrModeArg::Continuous => SnrSampling::Continuous {
                    low: a.snr_low,
                    high: a.snr_high,
                },
            },
            lr_start: a.lr_start,
            lr_end: a.lr_end,
        };
        Trainer::new(config, code, schedule, seed).map_err(|e| CliError::Usage(e.to_string()))?
    };
    fs::create_dir_all(&a.out).stage("output directory")?;
    write_resolved(&a.out, "train", &a, seed)?;

    let total = trainer.schedule().total_steps();
    let log_every = a.log_every;
    let result = trainer.run(|step, loss| {
        if log_every > 0 && (step % log_every == 0 || step == total) {
            let _ = writeln!(err, "step {step}/{total}  loss {loss:.5}");
        }
    });
    let ckpt = match result {
        Ok(()) => trainer.checkpoint(),
        Err(crate::model::TrainError::Diverged {
            step,
            reason,
            last_good,
        }) => {
            let path = a.out.join("last_good.ckpt");
            last_good.save(&path).stage("save checkpoint")?;
            return Err(runtime("train")(format!(
                "diverged at step {step} ({reason}); previous state saved to {}",
                path.display()
            )));
        }
        Err(e) => return Err(runtime("train")(e.to_string())),
    };
    let ckpt_path = a.out.join("model.ckpt");
    ckpt.save(&ckpt_path).stage("save checkpoint")?;

    let schedule = ckpt.schedule.lr_schedule();
    let smooth = smoothed(&ckpt.loss_history, 100);
    let mut csv = String::from("step,loss,smoothed_loss,lr\n");
    for (i, (&l, s)) in ckpt.loss_history.iter().zip(&smooth).enumerate() {
        let lr = schedule.lr(i as u64).unwrap_or(f64::NAN);
        csv.push_str(&format!("{},{l},{s},{lr:e}\n", i + 1));
    }
    fs::write(a.out.join("loss.csv"), csv).stage("loss history")?;
    let summary = serde_json::json!({
        "checkpoint": ckpt_path,
        "code": ckpt.code.name(),
        "step": ckpt.step,
        "total_steps": total,
        "lr": ckpt.lr(),
        "initial_loss": ckpt.loss_history.first(),
        "final_smoothed_loss": smooth.last(),
        "parameters": ckpt.config.param_count(),
    });
    print(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&summary).stage("output")?),
    )
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let seed = resolve_seed(a.opts.seed)?;
    let need_code = || -> Result<LinearCode, CliError> {
        let spec = a
            .code
            .as_deref()
            .ok_or_else(|| CliError::Usage("--code is required for this decoder".into()))?;
        load_code(spec).map_err(CliError::Usage)
    };
    let decoder: Box<dyn Decoder> = match a.decoder {
        DecoderArg::Ecct => {
            let path = a
                .checkpoint
                .as_ref()
                .ok_or_else(|| CliError::Usage("--checkpoint is required for the ecct decoder".into()))?;
            let ckpt = Checkpoint::load(path).stage("load checkpoint")?;
            if let Some(spec) = &a.code {
                let code = load_code(spec).map_err(CliError::Usage)?;
                if code.parity_check() != ckpt.code.parity_check() {
                    return Err(runtime("eval")(format!(
                        "checkpoint was trained on '{}', which differs from '{spec}'",
                        ckpt.code.name()
                    )));
                }
            }
            Box::new(EcctDecoder::new(ckpt.model().stage("model")?))
        }
        DecoderArg::Bp => {
            let mut bp = BpDecoder::new(need_code()?, a.iters);
            bp.early_stop = !a.no_early_stop;
            Box::new(bp)
        }
        DecoderArg::Ml => Box::new(MlDecoder::new(need_code()?).stage("ml")?),
        DecoderArg::Hard => Box::new(HardDecision { code: need_code()? }),
    };
    let o = &a.opts;
    let cfg = EvalConfig {
        snrs_db: o.snr.clone(),
        min_frames: o.min_frames,
        min_error_frames: o.min_errors,
        max_frames: o.max_frames,
        batch_frames: o.batch_frames,
        seed,
        source: match o.source {
            SourceArg::Zero => CodewordSource::Zero,
            SourceArg::Random => CodewordSource::Random,
        },
        workers: o.workers,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = run_ber(decoder.as_ref(), &cfg).stage("evaluation")?;
    if let Some(dir) = &o.out {
        write_report_files(dir, &report)?;
        write_resolved(dir, "eval", &a, seed)?;
    }
    print(out, &emit_report(&report, o.format.into()).stage("report")?)
}

fn write_report_files(dir: &Path, report: &EvalReport) -> Result<(), CliError> {
    fs::create_dir_all(dir).stage("output directory")?;
    for (name, format) in [
        ("report.json", ReportFormat::Json),
        ("report.csv", ReportFormat::Csv),
        ("report.txt", ReportFormat::Table),
    ] {
        fs::write(dir.join(name), emit_report(report, format).stage("report")?).stage("report")?;
    }
    fs::write(dir.join("curve.dat"), curve_data(report)).stage("report")
}

fn mask_stats_cmd(a: MaskStatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let code = load_code(&a.code).map_err(CliError::Usage)?;
    let mask: AttentionMask = build_mask(code.parity_check());
    let stats = mask_stats(&mask, code.parity_check());
    let mut value = serde_json::to_value(&stats).stage("output")?;
    value["code"] = code.name().into();
    value["n"] = code.n().into();
    value["k"] = code.k().into();
    if a.grid {
        value["grid"] = mask.grid().lines().collect::<Vec<_>>().into();
    }
    print(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&value).stage("output")?),
    )
}

fn attn_dump(a: AttnDumpArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(&a.checkpoint).stage("load checkpoint")?;
    let model = ckpt.model().stage("model")?;
    let n = model.code().n();
    let mut y = if a.y.is_empty() { vec![1.0; n] } else { a.y.clone() };
    if y.len() != n {
        return Err(CliError::Usage(format!(
            "--y has {} values, code length is {n}",
            y.len()
        )));
    }
    for &i in &a.corrupt {
        let v = y
            .get_mut(i)
            .ok_or_else(|| CliError::Usage(format!("--corrupt position {i} outside 0..{n}")))?;
        *v = -*v;
    }
    preprocess(model.code().parity_check(), &y).stage("preprocess")?;
    let map = dump_attention(&model, &y, a.layer, a.head, a.column).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut value = serde_json::to_value(&map).stage("output")?;
    value["y"] = y.into();
    print(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&value).stage("output")?),
    )
}

fn ckpt_info(a: CkptInfoArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ckpt = Checkpoint::load(&a.checkpoint).stage("load checkpoint")?;
    let h = &ckpt.loss_history;
    let info = serde_json::json!({
        "format_version": crate::model::CHECKPOINT_VERSION,
        "code": ckpt.code.name(),
        "n": ckpt.code.n(),
        "k": ckpt.code.k(),
        "config": ckpt.config,
        "parameters": ckpt.config.param_count(),
        "schedule": ckpt.schedule,
        "seed": ckpt.seed,
        "step": ckpt.step,
        "next_lr": ckpt.lr(),
        "loss_samples": h.len(),
        "first_loss": h.first(),
        "last_loss": h.last(),
    });
    print(
        out,
        &format!("{}\n", serde_json::to_string_pretty(&info).stage("output")?),
    )
}
