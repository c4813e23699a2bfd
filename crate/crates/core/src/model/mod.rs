//! The code-aware transformer decoder.
//!
//! Each of the `2n - k` input positions owns a learned vector. Bit positions
//! scale it by the channel magnitude, check positions by `+1`/`-1` from the
//! syndrome, so unreliable bits start near the origin. A stack of pre-norm
//! layers (masked multi-head attention, then a GEGLU feed-forward block)
//! follows; a final norm, a shared `d -> 1` reduction and a `(2n-k) -> n`
//! projection produce one flip logit per codeword bit.

mod checkpoint;
mod train;

use std::sync::Arc;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::{CodeError, LinearCode};
use crate::diffnum::{DiffError, GegluParams, Graph, Real, Var};
use crate::invariant::{postprocess, preprocess, soft_noise_from_logits, PreprocessedWord};
use crate::mask::{build_mask, AttentionMask};

pub use checkpoint::{Checkpoint, CheckpointError, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use train::{smoothed, train, SnrSampling, TrainError, TrainSchedule, Trainer};

/// Number of parameter arrays in one decoder layer.
pub const LAYER_PARAMS: usize = 18;
/// Parameter arrays after the layer stack (final norm and output head).
pub const HEAD_PARAMS: usize = 6;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("non-finite activation in {stage}")]
    NonFinite { stage: String },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("parameter set does not match the configuration: {0}")]
    ParamMismatch(String),
    #[error("{what} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },
}

/// Denominator applied to the attention scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttnScale {
    /// `sqrt(d)`, the model width.
    Model,
    /// `sqrt(d / h)`, the per-head width.
    #[default]
    Head,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    /// Mask derived from the parity-check matrix.
    #[default]
    Code,
    /// Full attention, for the ablation.
    Unmasked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Block length `n`.
    pub n: usize,
    /// Number of parity checks, `n - k`.
    pub checks: usize,
    pub layers: usize,
    pub dim: usize,
    pub heads: usize,
    pub ffn_mult: usize,
    pub attn_scale: AttnScale,
    pub mask_mode: MaskMode,
}

impl ModelConfig {
    /// Eight heads, feed-forward width `4 d`, per-head scaling, code mask.
    pub fn new(code: &LinearCode, layers: usize, dim: usize) -> Self {
        ModelConfig {
            n: code.n(),
            checks: code.checks(),
            layers,
            dim,
            heads: 8,
            ffn_mult: 4,
            attn_scale: AttnScale::Head,
            mask_mode: MaskMode::Code,
        }
    }

    pub fn with_heads(mut self, heads: usize) -> Self {
        self.heads = heads;
        self
    }

    pub fn with_mask_mode(mut self, mode: MaskMode) -> Self {
        self.mask_mode = mode;
        self
    }

    pub fn with_attn_scale(mut self, scale: AttnScale) -> Self {
        self.attn_scale = scale;
        self
    }

    /// Sequence length `2n - k`.
    pub fn seq_len(&self) -> usize {
        self.n + self.checks
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers == 0 {
            return Err(ModelError::Config("at least one layer is required".into()));
        }
        if self.heads == 0 || self.dim == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(ModelError::Config(format!(
                "dimension {} is not divisible by {} heads",
                self.dim, self.heads
            )));
        }
        if self.ffn_mult == 0 || self.n == 0 || self.checks == 0 {
            return Err(ModelError::Config("empty dimension".into()));
        }
        Ok(())
    }

    /// Names and shapes of every parameter array, in storage order.
    pub fn param_shapes(&self) -> Vec<(String, (usize, usize))> {
        let (d, s, n) = (self.dim, self.seq_len(), self.n);
        let hidden = self.ffn_mult * d;
        let mut out = vec![("embedding".to_string(), (s, d))];
        for l in 0..self.layers {
            let shapes = [
                ("attn_norm.gain", (1, d)),
                ("attn_norm.bias", (1, d)),
                ("attn.wq", (d, d)),
                ("attn.bq", (1, d)),
                ("attn.wk", (d, d)),
                ("attn.bk", (1, d)),
                ("attn.wv", (d, d)),
                ("attn.bv", (1, d)),
                ("attn.wo", (d, d)),
                ("attn.bo", (1, d)),
                ("ffn_norm.gain", (1, d)),
                ("ffn_norm.bias", (1, d)),
                ("ffn.w_gate", (d, hidden)),
                ("ffn.b_gate", (1, hidden)),
                ("ffn.w_lin", (d, hidden)),
                ("ffn.b_lin", (1, hidden)),
                ("ffn.w_out", (hidden, d)),
                ("ffn.b_out", (1, d)),
            ];
            debug_assert_eq!(shapes.len(), LAYER_PARAMS);
            out.extend(
                shapes
                    .into_iter()
                    .map(|(name, shape)| (format!("layer{l}.{name}"), shape)),
            );
        }
        out.extend([
            ("final_norm.gain".to_string(), (1, d)),
            ("final_norm.bias".to_string(), (1, d)),
            ("head.reduce_w".to_string(), (d, 1)),
            ("head.reduce_b".to_string(), (1, 1)),
            ("head.project_w".to_string(), (s, n)),
            ("head.project_b".to_string(), (1, n)),
        ]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().map(|(_, (r, c))| r * c).sum()
    }
}

/// Named parameter arrays in the order given by
/// [`ModelConfig::param_shapes`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub names: Vec<String>,
    pub tensors: Vec<Array2<F>>,
}

impl<F: Real> ModelParams<F> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let shapes = config.param_shapes();
        ModelParams {
            names: shapes.iter().map(|(n, _)| n.clone()).collect(),
            tensors: shapes.iter().map(|&(_, s)| Array2::zeros(s)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Array2<F>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Array2<F>> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(move |i| &mut self.tensors[i])
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Array2::len).sum()
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| t.mapv(|v| G::from_f64(v.as_f64())))
                .collect(),
        }
    }

    fn check_against(&self, config: &ModelConfig) -> Result<(), ModelError> {
        let shapes = config.param_shapes();
        if shapes.len() != self.tensors.len() {
            return Err(ModelError::ParamMismatch(format!(
                "expected {} arrays, found {}",
                shapes.len(),
                self.tensors.len()
            )));
        }
        for ((name, shape), t) in shapes.iter().zip(&self.tensors) {
            if t.dim() != *shape {
                return Err(ModelError::ParamMismatch(format!(
                    "{name}: expected {shape:?}, found {:?}",
                    t.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Fan-in scaled uniform weights, zero biases, unit norm gains and a
/// normal(0, 1/sqrt(d)) embedding table.
pub fn init_params<F: Real, R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> ModelParams<F> {
    let mut params = ModelParams::zeros(config);
    let emb_std = 1.0 / (config.dim as f64).sqrt();
    let normal = Normal::new(0.0, emb_std).expect("positive std");
    for (name, t) in params.names.iter().zip(params.tensors.iter_mut()) {
        if name == "embedding" {
            t.mapv_inplace(|_| F::from_f64(normal.sample(rng)));
        } else if name.ends_with(".gain") {
            t.fill(F::one());
        } else if name.contains(".w") || name.ends_with("_w") {
            let bound = 1.0 / (t.nrows() as f64).sqrt();
            let uniform = Uniform::new_inclusive(-bound, bound).expect("finite bounds");
            t.mapv_inplace(|_| F::from_f64(uniform.sample(rng)));
        }
    }
    params
}

/// Result of one recorded forward pass.
pub struct ForwardPass<F> {
    pub graph: Graph<F>,
    /// Leaf handle of each parameter array, in storage order.
    pub params: Vec<Var>,
    /// `[batch * (2n-k), d]` scaled embeddings fed to the first layer.
    pub embedding: Var,
    /// Output of the attention op in each layer.
    pub attention: Vec<Var>,
    /// `[batch, n]` flip logits.
    pub logits: Var,
}

/// A decoder bound to its code: configuration, mask and parameters.
#[derive(Debug, Clone)]
pub struct Ecct<F> {
    config: ModelConfig,
    code: LinearCode,
    mask: AttentionMask,
    additive: Arc<Vec<F>>,
    pub params: ModelParams<F>,
}

impl<F: Real> Ecct<F> {
    pub fn new(config: ModelConfig, code: LinearCode, params: ModelParams<F>) -> Result<Self, ModelError> {
        config.validate()?;
        if config.n != code.n() || config.checks != code.checks() {
            return Err(ModelError::Config(format!(
                "configuration is for n={}, n-k={} but code '{}' has n={}, n-k={}",
                config.n,
                config.checks,
                code.name(),
                code.n(),
                code.checks()
            )));
        }
        params.check_against(&config)?;
        let mask = match config.mask_mode {
            MaskMode::Code => build_mask(code.parity_check()),
            MaskMode::Unmasked => AttentionMask::unmasked(config.seq_len()),
        };
        Ok(Self::with_mask(config, code, mask, params))
    }

    /// Uses an explicit mask instead of deriving one from the code.
    pub fn with_mask(config: ModelConfig, code: LinearCode, mask: AttentionMask, params: ModelParams<F>) -> Self {
        let additive = Arc::new(mask.additive().into_iter().map(F::from_f64).collect());
        Ecct {
            config,
            code,
            mask,
            additive,
            params,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn code(&self) -> &LinearCode {
        &self.code
    }

    pub fn mask(&self) -> &AttentionMask {
        &self.mask
    }

    /// Embedding scalars `[batch, 2n - k]` for a batch of preprocessed words.
    pub fn scales(&self, batch: &[PreprocessedWord]) -> Result<Array2<F>, ModelError> {
        let s = self.config.seq_len();
        let mut out = Array2::zeros((batch.len(), s));
        for (b, word) in batch.iter().enumerate() {
            if word.len() != s {
                return Err(ModelError::Config(format!(
                    "input word has length {}, model expects {s}",
                    word.len()
                )));
            }
            for (i, v) in word.scales().enumerate() {
                out[[b, i]] = F::from_f64(v);
            }
        }
        Ok(out)
    }

    /// Records the full forward pass for embedding scalars `[batch, 2n-k]`.
    pub fn forward_scales(&self, scales: Array2<F>) -> Result<ForwardPass<F>, ModelError> {
        let cfg = &self.config;
        let (batch, s) = scales.dim();
        if s != cfg.seq_len() {
            return Err(ModelError::Config(format!(
                "scales have {s} positions, model expects {}",
                cfg.seq_len()
            )));
        }
        let mut g = Graph::new();
        let p: Vec<Var> = self.params.tensors.iter().map(|t| g.leaf(t.clone())).collect();
        let d_head = cfg.dim / cfg.heads;
        let inv_scale = F::one()
            / F::from_f64(match cfg.attn_scale {
                AttnScale::Model => cfg.dim as f64,
                AttnScale::Head => d_head as f64,
            })
            .sqrt();

        let embedding = g.scale_rows(p[0], scales)?;
        let mut x = embedding;
        let mut attention = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            let w = &p[1 + l * LAYER_PARAMS..1 + (l + 1) * LAYER_PARAMS];
            let h = g.layer_norm(x, w[0], w[1])?;
            let q = g.affine(h, w[2], w[3])?;
            let k = g.affine(h, w[4], w[5])?;
            let v = g.affine(h, w[6], w[7])?;
            let a = g.masked_attention(q, k, v, &self.additive, s, cfg.heads, inv_scale)?;
            attention.push(a);
            let a = g.affine(a, w[8], w[9])?;
            x = g.add(x, a)?;
            ensure_finite(&g, x, || format!("layer {l} attention block"))?;
            let h = g.layer_norm(x, w[10], w[11])?;
            let f = g.geglu(
                h,
                &GegluParams {
                    w_gate: w[12],
                    b_gate: w[13],
                    w_lin: w[14],
                    b_lin: w[15],
                    w_out: w[16],
                    b_out: w[17],
                },
            )?;
            x = g.add(x, f)?;
            ensure_finite(&g, x, || format!("layer {l} feed-forward block"))?;
        }
        let head = &p[1 + cfg.layers * LAYER_PARAMS..];
        let x = g.layer_norm(x, head[0], head[1])?;
        let reduced = g.affine(x, head[2], head[3])?;
        let reduced = g.reshape(reduced, batch, s)?;
        let logits = g.affine(reduced, head[4], head[5])?;
        ensure_finite(&g, logits, || "output head".to_string())?;
        Ok(ForwardPass {
            graph: g,
            params: p,
            embedding,
            attention,
            logits,
        })
    }

    pub fn forward(&self, batch: &[PreprocessedWord]) -> Result<ForwardPass<F>, ModelError> {
        self.forward_scales(self.scales(batch)?)
    }

    /// Flip logits `[batch, n]` for raw channel outputs.
    pub fn logits(&self, ys: &[Vec<f64>]) -> Result<Array2<F>, ModelError> {
        let pre = ys
            .iter()
            .map(|y| preprocess(self.code.parity_check(), y))
            .collect::<Result<Vec<_>, _>>()?;
        let pass = self.forward(&pre)?;
        Ok(pass.graph.value(pass.logits).clone())
    }

    /// Hard codeword estimates for a batch of channel outputs.
    pub fn decode_batch(&self, ys: &[Vec<f64>]) -> Result<Vec<Vec<u8>>, ModelError> {
        let logits = self.logits(ys)?;
        ys.iter()
            .zip(logits.outer_iter())
            .map(|(y, u)| {
                let u: Vec<f64> = u.iter().map(|v| v.as_f64()).collect();
                Ok(postprocess(y, &soft_noise_from_logits(&u))?)
            })
            .collect()
    }

    pub fn decode_word(&self, y: &[f64]) -> Result<Vec<u8>, ModelError> {
        Ok(self.decode_batch(&[y.to_vec()])?.remove(0))
    }
}

fn ensure_finite<F: Real>(g: &Graph<F>, v: Var, stage: impl FnOnce() -> String) -> Result<(), ModelError> {
    if g.value(v).iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ModelError::NonFinite { stage: stage() })
    }
}
