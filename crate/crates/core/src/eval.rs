//! Monte Carlo BER/FER measurement, report formats and attention dumps.
//!
//! Each SNR point is simulated in fixed-size batches. Batch `b` of point `s`
//! draws from its own random stream, so the frames of a batch never depend
//! on how batches are spread over threads. Batches are merged in index order
//! and the stopping rule is checked after each one.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bp::{bp_decode, channel_llr, TannerGraph};
use crate::channel::{bpsk_modulate, ebno_to_sigma, fill_gaussian, stream, ChannelError, GAUSSIAN_SAMPLER};
use crate::code::LinearCode;
use crate::diffnum::Real;
use crate::invariant::{hard_decision, preprocess};
use crate::model::{Ecct, ModelError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("decoder failed at {snr_db} dB on frames {first_frame}..{end_frame}: {message}")]
    Decoder {
        snr_db: f64,
        first_frame: u64,
        end_frame: u64,
        message: String,
    },
    #[error("unknown report format '{0}' (expected json, csv or table)")]
    UnknownFormat(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// A decoder under test. `decode_batch` maps received words to codeword
/// estimates; `sigma` is the channel noise level the words went through.
pub trait Decoder: Sync {
    fn name(&self) -> String;
    fn code(&self) -> &LinearCode;
    fn decode_batch(&self, ys: &[Vec<f64>], sigma: f64) -> Result<Vec<Vec<u8>>, String>;
}

/// Per-bit sign decision, no decoding.
pub struct HardDecision {
    pub code: LinearCode,
}

impl Decoder for HardDecision {
    fn name(&self) -> String {
        "hard-decision".into()
    }
    fn code(&self) -> &LinearCode {
        &self.code
    }
    fn decode_batch(&self, ys: &[Vec<f64>], _sigma: f64) -> Result<Vec<Vec<u8>>, String> {
        Ok(ys.iter().map(|y| hard_decision(y)).collect())
    }
}

/// Exhaustive maximum-likelihood search over the codebook.
pub struct MlDecoder {
    pub code: LinearCode,
}

impl MlDecoder {
    pub fn new(code: LinearCode) -> Result<Self, EvalError> {
        code.codebook().map_err(|e| EvalError::Config(e.to_string()))?;
        Ok(MlDecoder { code })
    }
}

impl Decoder for MlDecoder {
    fn name(&self) -> String {
        "ml".into()
    }
    fn code(&self) -> &LinearCode {
        &self.code
    }
    fn decode_batch(&self, ys: &[Vec<f64>], _sigma: f64) -> Result<Vec<Vec<u8>>, String> {
        ys.iter()
            .map(|y| self.code.ml_decode(y).map_err(|e| e.to_string()))
            .collect()
    }
}

/// Sum-product belief propagation.
pub struct BpDecoder {
    pub code: LinearCode,
    pub graph: TannerGraph,
    pub iters: usize,
    pub early_stop: bool,
}

impl BpDecoder {
    pub fn new(code: LinearCode, iters: usize) -> Self {
        BpDecoder {
            graph: TannerGraph::from_code(&code),
            code,
            iters,
            early_stop: true,
        }
    }
}

impl Decoder for BpDecoder {
    fn name(&self) -> String {
        format!("bp(L={})", self.iters)
    }
    fn code(&self) -> &LinearCode {
        &self.code
    }
    fn decode_batch(&self, ys: &[Vec<f64>], sigma: f64) -> Result<Vec<Vec<u8>>, String> {
        ys.iter()
            .map(|y| {
                let llr = channel_llr(y, sigma).map_err(|e| e.to_string())?;
                bp_decode(&self.graph, &llr, self.iters, self.early_stop)
                    .map(|o| o.bits)
                    .map_err(|e| e.to_string())
            })
            .collect()
    }
}

/// The transformer decoder. Words are pushed through the model in chunks
/// of `chunk` to bound the attention buffers.
pub struct EcctDecoder<F> {
    pub model: Ecct<F>,
    pub chunk: usize,
}

impl<F: Real> EcctDecoder<F> {
    pub fn new(model: Ecct<F>) -> Self {
        EcctDecoder { model, chunk: 64 }
    }
}

impl<F: Real> Decoder for EcctDecoder<F> {
    fn name(&self) -> String {
        let c = self.model.config();
        format!("ecct(N={},d={})", c.layers, c.dim)
    }
    fn code(&self) -> &LinearCode {
        self.model.code()
    }
    fn decode_batch(&self, ys: &[Vec<f64>], _sigma: f64) -> Result<Vec<Vec<u8>>, String> {
        let mut out = Vec::with_capacity(ys.len());
        for chunk in ys.chunks(self.chunk.max(1)) {
            out.extend(self.model.decode_batch(chunk).map_err(|e| e.to_string())?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CodewordSource {
    /// All-zero codeword in every frame.
    Zero,
    /// Uniform random message, encoded.
    #[default]
    Random,
}

impl FromStr for CodewordSource {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "zero" => Ok(CodewordSource::Zero),
            "random" => Ok(CodewordSource::Random),
            other => Err(EvalError::Config(format!("unknown codeword source '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub snrs_db: Vec<f64>,
    pub min_frames: u64,
    pub min_error_frames: u64,
    pub max_frames: u64,
    pub batch_frames: usize,
    pub seed: u64,
    pub source: CodewordSource,
    /// Batches simulated concurrently; 0 means the rayon default.
    pub workers: usize,
}

impl EvalConfig {
    /// At least 10^5 frames and 500 frame errors per point, capped at 10^7.
    pub fn new(snrs_db: Vec<f64>, seed: u64) -> Self {
        EvalConfig {
            snrs_db,
            min_frames: 100_000,
            min_error_frames: 500,
            max_frames: 10_000_000,
            batch_frames: 2_000,
            seed,
            source: CodewordSource::Random,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if self.snrs_db.is_empty() {
            return Err(EvalError::Config("SNR list is empty".into()));
        }
        if let Some(s) = self.snrs_db.iter().find(|s| !s.is_finite()) {
            return Err(EvalError::Config(format!("SNR {s} is not finite")));
        }
        if self.min_frames == 0 || self.batch_frames == 0 {
            return Err(EvalError::Config("frame counts must be positive".into()));
        }
        if self.max_frames < self.min_frames {
            return Err(EvalError::Config(format!(
                "frame cap {} below minimum {}",
                self.max_frames, self.min_frames
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub snr_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub frame_errors: u64,
    pub ber: f64,
    pub fer: f64,
    /// `-ln(BER)`; with no bit errors, `ln(frames * n)` as a lower bound.
    pub neg_ln_ber: f64,
    pub neg_ln_ber_is_lower_bound: bool,
    /// Half-width of the normal-approximation 95% interval on the BER.
    pub ci95: f64,
}

impl SnrPoint {
    pub fn from_counts(snr_db: f64, n: usize, frames: u64, bit_errors: u64, frame_errors: u64) -> Self {
        let bits = frames as f64 * n as f64;
        let ber = bit_errors as f64 / bits;
        let (neg_ln_ber, bound) = if bit_errors > 0 {
            (-ber.ln(), false)
        } else {
            (bits.ln(), true)
        };
        SnrPoint {
            snr_db,
            frames,
            bit_errors,
            frame_errors,
            ber,
            fer: frame_errors as f64 / frames as f64,
            neg_ln_ber,
            neg_ln_ber_is_lower_bound: bound,
            ci95: 1.96 * (ber * (1.0 - ber) / bits).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub decoder: String,
    pub code: String,
    pub n: usize,
    pub k: usize,
    pub seed: u64,
    pub source: CodewordSource,
    pub sampler: String,
    pub wall_time_s: f64,
    pub points: Vec<SnrPoint>,
}

#[derive(Default, Clone, Copy)]
struct Counts {
    frames: u64,
    bit_errors: u64,
    frame_errors: u64,
}

/// Simulates batch `batch` of SNR point `point`.
fn run_batch(
    decoder: &dyn Decoder,
    cfg: &EvalConfig,
    point: usize,
    batch: u64,
    frames: usize,
    sigma: f64,
) -> Result<Counts, EvalError> {
    let code = decoder.code();
    let n = code.n();
    let mut rng = stream(cfg.seed, ((point as u64) << 40) | batch);
    let mut sent = Vec::with_capacity(frames);
    let mut received = Vec::with_capacity(frames);
    let mut noise = vec![0.0; n];
    let mut msg = vec![0u8; code.k()];
    for _ in 0..frames {
        let x = match cfg.source {
            CodewordSource::Zero => vec![0u8; n],
            CodewordSource::Random => {
                for m in msg.iter_mut() {
                    *m = rng.random_range(0..2);
                }
                code.encode(&msg).expect("message length is k")
            }
        };
        fill_gaussian(&mut rng, &mut noise);
        let y = bpsk_modulate(&x)
            .iter()
            .zip(&noise)
            .map(|(s, z)| s + sigma * z)
            .collect();
        sent.push(x);
        received.push(y);
    }
    let first = batch * cfg.batch_frames as u64;
    let fail = |message: String| EvalError::Decoder {
        snr_db: cfg.snrs_db[point],
        first_frame: first,
        end_frame: first + frames as u64,
        message,
    };
    let decoded = decoder.decode_batch(&received, sigma).map_err(fail)?;
    if decoded.len() != frames {
        return Err(fail(format!("{} outputs for {frames} inputs", decoded.len())));
    }
    let mut counts = Counts {
        frames: frames as u64,
        ..Counts::default()
    };
    for (x, xh) in sent.iter().zip(&decoded) {
        if xh.len() != n {
            return Err(fail(format!("output of length {} for n = {n}", xh.len())));
        }
        let errs = x.iter().zip(xh).filter(|(a, b)| a != b).count() as u64;
        counts.bit_errors += errs;
        counts.frame_errors += u64::from(errs > 0);
    }
    Ok(counts)
}

fn run_point(decoder: &dyn Decoder, cfg: &EvalConfig, point: usize) -> Result<SnrPoint, EvalError> {
    let code = decoder.code();
    let snr = cfg.snrs_db[point];
    let sigma = ebno_to_sigma(snr, code.rate())?;
    let per_round = if cfg.workers == 0 {
        rayon::current_num_threads()
    } else {
        cfg.workers
    }
    .max(1) as u64;
    let mut total = Counts::default();
    let mut next = 0u64;
    let done = |c: &Counts| {
        (c.frames >= cfg.min_frames && c.frame_errors >= cfg.min_error_frames) || c.frames >= cfg.max_frames
    };
    while !done(&total) {
        // batch sizes are fixed by index, the last one trimmed to the cap
        let sizes: Vec<(u64, usize)> = (next..next + per_round)
            .map(|b| {
                let start = b * cfg.batch_frames as u64;
                let size = (cfg.max_frames.saturating_sub(start)).min(cfg.batch_frames as u64);
                (b, size as usize)
            })
            .filter(|&(_, s)| s > 0)
            .collect();
        let results: Vec<Result<Counts, EvalError>> = sizes
            .par_iter()
            .map(|&(b, size)| run_batch(decoder, cfg, point, b, size, sigma))
            .collect();
        for r in results {
            let c = r?;
            total.frames += c.frames;
            total.bit_errors += c.bit_errors;
            total.frame_errors += c.frame_errors;
            next += 1;
            if done(&total) {
                break;
            }
        }
    }
    Ok(SnrPoint::from_counts(
        snr,
        code.n(),
        total.frames,
        total.bit_errors,
        total.frame_errors,
    ))
}

/// Runs every SNR point of `cfg` against `decoder`.
pub fn run_ber(decoder: &dyn Decoder, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    cfg.validate()?;
    let start = Instant::now();
    let mut points = Vec::with_capacity(cfg.snrs_db.len());
    let mut run = || -> Result<(), EvalError> {
        for p in 0..cfg.snrs_db.len() {
            points.push(run_point(decoder, cfg, p)?);
        }
        Ok(())
    };
    if cfg.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| EvalError::Config(e.to_string()))?
            .install(run)?;
    } else {
        run()?;
    }
    let code = decoder.code();
    Ok(EvalReport {
        decoder: decoder.name(),
        code: code.name().to_string(),
        n: code.n(),
        k: code.k(),
        seed: cfg.seed,
        source: cfg.source,
        sampler: GAUSSIAN_SAMPLER.to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        points,
    })
}

/// `Q(x) = P(N(0,1) > x)`.
pub fn gaussian_tail(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Uncoded BPSK bit error rate at `ebno_db` for a code of the given rate.
pub fn hard_decision_ber(ebno_db: f64, rate: f64) -> f64 {
    gaussian_tail((2.0 * rate * 10f64.powf(ebno_db / 10.0)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Table,
}

impl FromStr for ReportFormat {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, EvalError> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "table" | "table-text" | "text" => Ok(ReportFormat::Table),
            other => Err(EvalError::UnknownFormat(other.to_string())),
        }
    }
}

pub const CSV_HEADER: &str = "snr_db,frames,bit_errors,frame_errors,ber,fer,neg_ln_ber,ci95";

pub fn emit_report(report: &EvalReport, format: ReportFormat) -> Result<String, EvalError> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)? + "\n"),
        ReportFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for p in &report.points {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:e},{:e},{},{:e}",
                    p.snr_db, p.frames, p.bit_errors, p.frame_errors, p.ber, p.fer, p.neg_ln_ber, p.ci95
                );
            }
            Ok(out)
        }
        ReportFormat::Table => Ok(table_text(report)),
    }
}

/// One row of `-ln(BER)` per SNR column, then per-point details. Bounds
/// are prefixed with `>`.
fn table_text(report: &EvalReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "code {} (n={}, k={})  decoder {}  seed {}",
        report.code, report.n, report.k, report.decoder, report.seed
    );
    let label = format!("{:<24}", "-ln(BER)");
    let _ = write!(out, "{:<24}", "Eb/N0 [dB]");
    for p in &report.points {
        let _ = write!(out, "{:>9}", p.snr_db);
    }
    out.push('\n');
    out.push_str(&label);
    for p in &report.points {
        let cell = if p.neg_ln_ber_is_lower_bound {
            format!(">{:.2}", p.neg_ln_ber)
        } else {
            format!("{:.2}", p.neg_ln_ber)
        };
        let _ = write!(out, "{cell:>9}");
    }
    out.push_str("\n\n");
    let _ = writeln!(
        out,
        "{:>8} {:>10} {:>11} {:>11} {:>11} {:>11} {:>11}",
        "snr_db", "frames", "bit_errors", "frame_errs", "ber", "fer", "ci95"
    );
    for p in &report.points {
        let _ = writeln!(
            out,
            "{:>8} {:>10} {:>11} {:>11} {:>11.4e} {:>11.4e} {:>11.2e}",
            p.snr_db, p.frames, p.bit_errors, p.frame_errors, p.ber, p.fer, p.ci95
        );
    }
    out
}

/// Two whitespace-separated columns (SNR, BER) for plotting.
pub fn curve_data(report: &EvalReport) -> String {
    let mut out = format!("# {} on {}\n# snr_db ber\n", report.decoder, report.code);
    for p in &report.points {
        let _ = writeln!(out, "{} {:e}", p.snr_db, p.ber);
    }
    out
}

/// Post-softmax attention of one head for a single received word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMap {
    pub layer: usize,
    pub head: usize,
    pub size: usize,
    /// `weights[i][j]`: how much query `i` attends to key `j`. Denied
    /// entries are exactly zero.
    pub weights: Vec<Vec<f64>>,
    pub column: usize,
    /// `weights[i][column]` for every query `i`.
    pub column_values: Vec<f64>,
}

pub fn dump_attention<F: Real>(
    model: &Ecct<F>,
    y: &[f64],
    layer: usize,
    head: usize,
    column: usize,
) -> Result<AttentionMap, EvalError> {
    let cfg = model.config();
    let size = cfg.seq_len();
    for (what, index, limit) in [
        ("layer", layer, cfg.layers),
        ("head", head, cfg.heads),
        ("column", column, size),
    ] {
        if index >= limit {
            return Err(ModelError::IndexOutOfRange { what, index, limit }.into());
        }
    }
    let pre = preprocess(model.code().parity_check(), y).map_err(ModelError::from)?;
    let pass = model.forward(&[pre])?;
    let probs = pass
        .graph
        .attention_weights(pass.attention[layer])
        .expect("attention node records its weights");
    let block = &probs[head * size * size..][..size * size];
    let mask = model.mask();
    let weights: Vec<Vec<f64>> = (0..size)
        .map(|i| {
            (0..size)
                .map(|j| {
                    if mask.allowed(i, j) {
                        block[i * size + j].as_f64()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    let column_values = weights.iter().map(|row| row[column]).collect();
    Ok(AttentionMap {
        layer,
        head,
        size,
        weights,
        column,
        column_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::construct::{hamming_7_4, repetition};
    use crate::model::{init_params, ModelConfig};

    /// Flips a fixed set of bits in every frame.
    struct Stub {
        code: LinearCode,
        flips: Vec<usize>,
        every: usize,
    }

    impl Decoder for Stub {
        fn name(&self) -> String {
            "stub".into()
        }
        fn code(&self) -> &LinearCode {
            &self.code
        }
        fn decode_batch(&self, ys: &[Vec<f64>], sigma: f64) -> Result<Vec<Vec<u8>>, String> {
            // recover the sent codeword exactly from the tiny noise, then
            // corrupt every `every`-th frame of the batch
            assert!(sigma < 1e-3);
            Ok(ys
                .iter()
                .enumerate()
                .map(|(i, y)| {
                    let mut x = hard_decision(y);
                    if i % self.every == 0 {
                        for &f in &self.flips {
                            x[f] ^= 1;
                        }
                    }
                    x
                })
                .collect())
        }
    }

    fn quick(snrs: Vec<f64>, frames: u64) -> EvalConfig {
        let mut cfg = EvalConfig::new(snrs, 3);
        cfg.min_frames = frames;
        cfg.max_frames = frames;
        cfg.min_error_frames = 0;
        cfg.batch_frames = 100;
        cfg
    }

    #[test]
    fn stub_counts_are_exact() {
        let stub = Stub {
            code: hamming_7_4(),
            flips: vec![1, 4, 6],
            every: 4,
        };
        let report = run_ber(&stub, &quick(vec![80.0], 1000)).unwrap();
        let p = &report.points[0];
        // 100-frame batches, frames 0, 4, 8, ... of each batch corrupted
        assert_eq!(p.frames, 1000);
        assert_eq!(p.frame_errors, 250);
        assert_eq!(p.bit_errors, 750);
        assert_eq!(p.ber, 750.0 / 7000.0);
        assert_eq!(p.fer, 0.25);
    }

    #[test]
    fn noiseless_repetition_reports_a_bound() {
        let d = HardDecision { code: repetition(2) };
        let report = run_ber(&d, &quick(vec![60.0], 500)).unwrap();
        let p = &report.points[0];
        assert_eq!(p.bit_errors, 0);
        assert_eq!(p.ber, 0.0);
        assert!(p.neg_ln_ber_is_lower_bound);
        assert_eq!(p.neg_ln_ber, 1000f64.ln());
        assert!(emit_report(&report, ReportFormat::Table).unwrap().contains(">6.91"));
    }

    #[test]
    fn stopping_rule_needs_both_minimums() {
        let d = HardDecision { code: hamming_7_4() };
        let mut cfg = EvalConfig::new(vec![2.0], 1);
        cfg.min_frames = 1000;
        cfg.min_error_frames = 3000;
        cfg.batch_frames = 500;
        let p = &run_ber(&d, &cfg).unwrap().points[0];
        assert!(p.frame_errors >= 3000);
        assert!(p.frames >= 1000);
        assert_eq!(p.frames % 500, 0);
        // stopped at the first batch boundary that satisfied the rule
        assert!(p.frame_errors - 3000 < 500);

        cfg.max_frames = 2000;
        cfg.min_error_frames = 1_000_000;
        assert_eq!(run_ber(&d, &cfg).unwrap().points[0].frames, 2000);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let d = HardDecision { code: hamming_7_4() };
        let mut cfg = EvalConfig::new(vec![3.0, 5.0], 9);
        cfg.min_frames = 5000;
        cfg.min_error_frames = 100;
        cfg.batch_frames = 700;
        cfg.workers = 1;
        let a = run_ber(&d, &cfg).unwrap();
        cfg.workers = 3;
        let b = run_ber(&d, &cfg).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn zero_and_random_codewords_agree_for_hard_decision() {
        let d = HardDecision { code: hamming_7_4() };
        let mut cfg = quick(vec![4.0], 20_000);
        let r = run_ber(&d, &cfg).unwrap().points[0].clone();
        cfg.source = CodewordSource::Zero;
        let z = run_ber(&d, &cfg).unwrap().points[0].clone();
        assert!((r.ber - z.ber).abs() < 3.0 * (r.ci95 + z.ci95));
    }

    #[test]
    fn closed_form_tail_values() {
        assert!((gaussian_tail(0.0) - 0.5).abs() < 1e-15);
        assert!((gaussian_tail(1.0) - 0.158_655_253_931_457_05).abs() < 1e-15);
        assert!((gaussian_tail(3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-15);
        // R = 1/2 at 0 dB gives Q(1)
        assert!((hard_decision_ber(0.0, 0.5) - gaussian_tail(1.0)).abs() < 1e-16);
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::new(vec![], 0).validate().is_err());
        assert!(EvalConfig::new(vec![f64::NAN], 0).validate().is_err());
        let mut c = EvalConfig::new(vec![1.0], 0);
        c.max_frames = 10;
        assert!(c.validate().is_err());
    }

    #[test]
    fn formats() {
        let d = HardDecision { code: hamming_7_4() };
        let report = run_ber(&d, &quick(vec![4.0, 5.0], 3000)).unwrap();
        let json = emit_report(&report, ReportFormat::Json).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        let csv = emit_report(&report, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        let cells: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(cells.len(), 8);
        assert_eq!(cells[0], "4");
        assert_eq!(cells[1].parse::<u64>().unwrap(), report.points[0].frames);
        assert_eq!(cells[6].parse::<f64>().unwrap(), report.points[0].neg_ln_ber);
        assert!("xml".parse::<ReportFormat>().is_err());
        let curve = curve_data(&report);
        assert_eq!(curve.lines().filter(|l| !l.starts_with('#')).count(), 2);
    }

    #[test]
    fn decoder_failures_carry_the_frame_range() {
        struct Broken(LinearCode);
        impl Decoder for Broken {
            fn name(&self) -> String {
                "broken".into()
            }
            fn code(&self) -> &LinearCode {
                &self.0
            }
            fn decode_batch(&self, _: &[Vec<f64>], _: f64) -> Result<Vec<Vec<u8>>, String> {
                Err("boom".into())
            }
        }
        let err = run_ber(&Broken(hamming_7_4()), &quick(vec![1.0], 100)).unwrap_err();
        assert!(matches!(
            err,
            EvalError::Decoder {
                first_frame: 0,
                end_frame: 100,
                ..
            }
        ));
    }

    #[test]
    fn attention_dump_contract() {
        let code = hamming_7_4();
        let cfg = ModelConfig::new(&code, 2, 16).with_heads(2);
        let params = init_params::<f64, _>(&cfg, &mut stream(4, 0));
        let model = Ecct::new(cfg, code, params).unwrap();
        let y = [-0.3, 1.1, 0.9, 1.2, 0.8, 1.0, 0.7];
        let map = dump_attention(&model, &y, 1, 1, 0).unwrap();
        assert_eq!(map.size, 10);
        for (i, row) in map.weights.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            for (j, &w) in row.iter().enumerate() {
                if !model.mask().allowed(i, j) {
                    assert_eq!(w, 0.0);
                }
            }
            assert_eq!(map.column_values[i], row[0]);
        }
        assert!(dump_attention(&model, &y, 2, 0, 0).is_err());
        assert!(dump_attention(&model, &y, 0, 2, 0).is_err());
        assert!(dump_attention(&model, &y, 0, 0, 10).is_err());
    }

    #[test]
    fn untrained_model_flips_exactly_where_logits_are_positive() {
        let code = hamming_7_4();
        let cfg = ModelConfig::new(&code, 1, 16);
        let params = init_params::<f32, _>(&cfg, &mut stream(5, 0));
        let model = Ecct::new(cfg, code.clone(), params).unwrap();
        let sigma = ebno_to_sigma(6.0, code.rate()).unwrap();
        let mut rng = stream(12, 0);
        let mut noise = vec![0.0; 7];
        let ys: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                fill_gaussian(&mut rng, &mut noise);
                noise.iter().map(|z| 1.0 + sigma * z).collect()
            })
            .collect();
        let logits = model.logits(&ys).unwrap();
        let decoded = model.decode_batch(&ys).unwrap();
        for ((y, u), x) in ys.iter().zip(logits.outer_iter()).zip(&decoded) {
            let expected: Vec<u8> = hard_decision(y)
                .iter()
                .zip(u)
                .map(|(&h, &u)| h ^ u8::from(u > 0.0))
                .collect();
            assert_eq!(x, &expected);
        }

        // shifted so every logit is negative, the model reduces to hard decision
        let mut model = model;
        let shift = logits.iter().fold(0f32, |m, &u| m.max(u)) + 1.0;
        model
            .params
            .get_mut("head.project_b")
            .unwrap()
            .mapv_inplace(|b| b - shift);
        let mut eval = quick(vec![6.0], 40_000);
        eval.batch_frames = 2000;
        let p = run_ber(&EcctDecoder::new(model), &eval).unwrap().points[0].clone();
        let hd = hard_decision_ber(6.0, code.rate());
        assert!((p.ber / hd - 1.0).abs() < 0.1, "{} vs {hd}", p.ber);
    }
}
