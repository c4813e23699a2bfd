//! Checkpoint container.
//!
//! ```text
//! offset  size  content
//! 0       8     magic "ECCTCKPT"
//! 8       4     format version, u32 little-endian
//! 12      8     header length L, u64 little-endian
//! 20      L     UTF-8 JSON header
//! 20+L    ...   f32 little-endian arrays, row-major
//! ```
//!
//! The header records the model configuration, the code (name and
//! parity-check matrix in alist form), schedule, seed, step, Adam settings
//! and step count, the loss history, and the name and shape of every array.
//! The payload holds the parameters in header order, then the Adam first
//! moments, then the second moments, in the same order.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Ecct, ModelConfig, ModelError, ModelParams, TrainSchedule};
use crate::code::{emit_alist, parse_alist, AlistError};
use crate::code::{CodeError, LinearCode};
use crate::diffnum::{Adam, AdamConfig};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ECCTCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("malformed header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("embedded parity-check matrix: {0}")]
    Alist(#[from] AlistError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("payload: {0}")]
    Payload(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub code: LinearCode,
    pub params: ModelParams<f32>,
    pub adam: Adam<f32>,
    pub schedule: TrainSchedule,
    pub seed: u64,
    pub step: u64,
    pub loss_history: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    code_name: String,
    parity_alist: String,
    schedule: TrainSchedule,
    seed: u64,
    step: u64,
    adam: AdamConfig,
    adam_step: u64,
    loss_history: Vec<f32>,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn model(&self) -> Result<Ecct<f32>, ModelError> {
        Ecct::new(self.config.clone(), self.code.clone(), self.params.clone())
    }

    /// Learning rate the next update would use.
    pub fn lr(&self) -> f64 {
        let total = self.schedule.total_steps();
        self.schedule
            .lr_schedule()
            .lr(self.step.min(total))
            .expect("step clamped to schedule")
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), CheckpointError> {
        let header = Header {
            config: self.config.clone(),
            code_name: self.code.name().to_string(),
            parity_alist: emit_alist(self.code.parity_check()),
            schedule: self.schedule,
            seed: self.seed,
            step: self.step,
            adam: self.adam.config,
            adam_step: self.adam.step,
            loss_history: self.loss_history.clone(),
            tensors: self
                .params
                .names
                .iter()
                .zip(&self.params.tensors)
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    rows: t.nrows(),
                    cols: t.ncols(),
                })
                .collect(),
        };
        let json = serde_json::to_vec(&header)?;
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        out.write_all(&(json.len() as u64).to_le_bytes())?;
        out.write_all(&json)?;
        let arrays = self
            .params
            .tensors
            .iter()
            .chain(&self.adam.first_moment)
            .chain(&self.adam.second_moment);
        let mut buf = Vec::new();
        for t in arrays {
            buf.clear();
            for v in t.iter() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            out.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len)?;
        let len = usize::try_from(u64::from_le_bytes(len))
            .map_err(|_| CheckpointError::Payload("header length overflows".into()))?;
        let mut json = vec![0u8; len];
        input.read_exact(&mut json)?;
        let header: Header = serde_json::from_slice(&json)?;

        let h = parse_alist(&header.parity_alist)?;
        let code = LinearCode::from_parity(header.code_name, h)?;
        let expected = header.config.param_shapes();
        if expected.len() != header.tensors.len()
            || expected
                .iter()
                .zip(&header.tensors)
                .any(|((name, shape), e)| name != &e.name || *shape != (e.rows, e.cols))
        {
            return Err(CheckpointError::Payload(
                "tensor table does not match the configuration".into(),
            ));
        }
        let read_set = |input: &mut R| -> Result<Vec<Array2<f32>>, CheckpointError> {
            header
                .tensors
                .iter()
                .map(|e| {
                    let mut bytes = vec![0u8; e.rows * e.cols * 4];
                    input
                        .read_exact(&mut bytes)
                        .map_err(|err| CheckpointError::Payload(format!("{}: {err}", e.name)))?;
                    let data = bytes
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect();
                    Ok(Array2::from_shape_vec((e.rows, e.cols), data).expect("sized from header"))
                })
                .collect()
        };
        let tensors = read_set(&mut input)?;
        let first_moment = read_set(&mut input)?;
        let second_moment = read_set(&mut input)?;
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(CheckpointError::Payload("trailing bytes".into()));
        }
        let params = ModelParams {
            names: header.tensors.iter().map(|e| e.name.clone()).collect(),
            tensors,
        };
        // validates the configuration against the code
        Ecct::new(header.config.clone(), code.clone(), params.clone())?;
        Ok(Checkpoint {
            config: header.config,
            code,
            params,
            adam: Adam {
                config: header.adam,
                step: header.adam_step,
                first_moment,
                second_moment,
            },
            schedule: header.schedule,
            seed: header.seed,
            step: header.step,
            loss_history: header.loss_history,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        Self::read_from(bytes)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        let file = std::fs::File::create(path)?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
