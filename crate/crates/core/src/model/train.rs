use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{init_params, Checkpoint, Ecct, ModelConfig, ModelError};
use crate::channel::{ebno_to_sigma, fill_gaussian, stream, ChannelError};
use crate::code::LinearCode;
use crate::diffnum::{Adam, AdamConfig, DiffError, LrSchedule, LR_END, LR_START};
use crate::invariant::{hard_decision, preprocess, PreprocessedWord};

/// Words per worker chunk inside one minibatch. Gradients of the chunks are
/// summed in chunk order, so results do not depend on the thread count.
const CHUNK: usize = 32;

/// How the per-minibatch Eb/N0 is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SnrSampling {
    /// Uniform over the integers `low..=high` dB.
    Integers { low: i32, high: i32 },
    /// Uniform over the interval `[low, high]` dB.
    Continuous { low: f64, high: f64 },
}

impl Default for SnrSampling {
    fn default() -> Self {
        SnrSampling::Integers { low: 3, high: 7 }
    }
}

impl SnrSampling {
    fn validate(&self) -> Result<(), TrainError> {
        let ok = match *self {
            SnrSampling::Integers { low, high } => low <= high,
            SnrSampling::Continuous { low, high } => low.is_finite() && high.is_finite() && low <= high,
        };
        if ok {
            Ok(())
        } else {
            Err(TrainError::Schedule(format!("empty SNR range {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SnrSampling::Integers { low, high } => f64::from(rng.random_range(low..=high)),
            SnrSampling::Continuous { low, high } if low == high => low,
            SnrSampling::Continuous { low, high } => rng.random_range(low..=high),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epochs: u64,
    pub minibatches_per_epoch: u64,
    pub batch_size: usize,
    pub snr: SnrSampling,
    pub lr_start: f64,
    pub lr_end: f64,
}

impl Default for TrainSchedule {
    /// 100 epochs of 200 minibatches of 128 words.
    fn default() -> Self {
        TrainSchedule {
            epochs: 100,
            minibatches_per_epoch: 200,
            batch_size: 128,
            snr: SnrSampling::default(),
            lr_start: LR_START,
            lr_end: LR_END,
        }
    }
}

impl TrainSchedule {
    pub fn new(epochs: u64, minibatches_per_epoch: u64) -> Self {
        TrainSchedule {
            epochs,
            minibatches_per_epoch,
            ..Self::default()
        }
    }

    pub fn total_steps(&self) -> u64 {
        self.epochs * self.minibatches_per_epoch
    }

    pub fn lr_schedule(&self) -> LrSchedule {
        LrSchedule {
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            total_steps: self.total_steps(),
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    /// The loss or a gradient went non-finite. The checkpoint holds the
    /// state before the failing step.
    #[error("training diverged at step {step}: {reason}")]
    Diverged {
        step: u64,
        reason: String,
        last_good: Box<Checkpoint>,
    },
}

/// Training state: model, optimizer, schedule position and loss history.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub(crate) model: Ecct<f32>,
    pub(crate) adam: Adam<f32>,
    pub(crate) schedule: TrainSchedule,
    pub(crate) seed: u64,
    pub(crate) step: u64,
    pub(crate) loss_history: Vec<f32>,
}

impl Trainer {
    /// Fresh parameters drawn from stream 0 of `seed`; minibatch `t` uses
    /// stream `t + 1`.
    pub fn new(config: ModelConfig, code: LinearCode, schedule: TrainSchedule, seed: u64) -> Result<Self, TrainError> {
        config.validate()?;
        schedule.snr.validate()?;
        if schedule.batch_size == 0 {
            return Err(TrainError::Schedule("batch size must be positive".into()));
        }
        let params = init_params(&config, &mut stream(seed, 0));
        let model = Ecct::new(config, code, params)?;
        let adam = Adam::new(AdamConfig::default(), model.params.tensors.iter().map(|t| t.dim()));
        Ok(Trainer {
            model,
            adam,
            schedule,
            seed,
            step: 0,
            loss_history: Vec::new(),
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, TrainError> {
        let model = ckpt.model()?;
        Ok(Trainer {
            model,
            adam: ckpt.adam.clone(),
            schedule: ckpt.schedule,
            seed: ckpt.seed,
            step: ckpt.step,
            loss_history: ckpt.loss_history.clone(),
        })
    }

    pub fn model(&self) -> &Ecct<f32> {
        &self.model
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn schedule(&self) -> &TrainSchedule {
        &self.schedule
    }

    pub fn loss_history(&self) -> &[f32] {
        &self.loss_history
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.schedule.total_steps()
    }

    /// Learning rate the next step will use.
    pub fn current_lr(&self) -> f64 {
        let total = self.schedule.total_steps();
        self.schedule
            .lr_schedule()
            .lr(self.step.min(total))
            .expect("step clamped to schedule")
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.model.config().clone(),
            code: self.model.code().clone(),
            params: self.model.params.clone(),
            adam: self.adam.clone(),
            schedule: self.schedule,
            seed: self.seed,
            step: self.step,
            loss_history: self.loss_history.clone(),
        }
    }

    /// Zero-codeword minibatch for `step`: received words and their
    /// hard-decision flip targets.
    pub fn minibatch(&self, step: u64) -> Result<(Vec<PreprocessedWord>, Array2<f32>), TrainError> {
        let code = self.model.code();
        let n = code.n();
        let mut rng = stream(self.seed, step + 1);
        let ebno = self.schedule.snr.sample(&mut rng);
        let sigma = ebno_to_sigma(ebno, code.rate())?;
        let batch = self.schedule.batch_size;
        let mut noise = vec![0.0; n];
        let mut words = Vec::with_capacity(batch);
        let mut targets = Array2::zeros((batch, n));
        for b in 0..batch {
            fill_gaussian(&mut rng, &mut noise);
            let y: Vec<f64> = noise.iter().map(|z| 1.0 + sigma * z).collect();
            for (t, bit) in targets.row_mut(b).iter_mut().zip(hard_decision(&y)) {
                *t = f32::from(bit);
            }
            words.push(preprocess(code.parity_check(), &y).map_err(ModelError::from)?);
        }
        Ok((words, targets))
    }

    /// Mean loss and gradients over a batch, split into fixed chunks.
    pub fn loss_and_grads(
        &self,
        words: &[PreprocessedWord],
        targets: &Array2<f32>,
    ) -> Result<(f32, Vec<Array2<f32>>), ModelError> {
        let total = words.len() as f32;
        let parts: Vec<_> = words
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let rows = targets.slice(ndarray::s![c * CHUNK..c * CHUNK + chunk.len(), ..]);
                let pass = self.model.forward(chunk)?;
                let mut g = pass.graph;
                let loss = g.bce_with_logits(pass.logits, rows.to_owned())?;
                let grads = g.backward(loss);
                let weight = chunk.len() as f32 / total;
                let loss = g.value(loss)[[0, 0]] * weight;
                let grads: Vec<Array2<f32>> = pass
                    .params
                    .iter()
                    .zip(&self.model.params.tensors)
                    .map(|(&v, t)| grads.get_or_zeros(v, t.dim()) * weight)
                    .collect();
                Ok::<_, ModelError>((loss, grads))
            })
            .collect::<Result<_, _>>()?;
        let mut iter = parts.into_iter();
        let (mut loss, mut grads) = iter.next().expect("non-empty batch");
        for (l, g) in iter {
            loss += l;
            for (acc, x) in grads.iter_mut().zip(g) {
                *acc += &x;
            }
        }
        Ok((loss, grads))
    }

    /// One minibatch update. Returns the minibatch loss.
    pub fn train_step(&mut self) -> Result<f32, TrainError> {
        let total = self.schedule.total_steps();
        if self.step >= total {
            return Err(TrainError::Schedule(format!(
                "schedule of {total} steps already complete"
            )));
        }
        let (words, targets) = self.minibatch(self.step)?;
        let (loss, grads) = match self.loss_and_grads(&words, &targets) {
            Ok(v) => v,
            Err(ModelError::NonFinite { stage }) => {
                return Err(self.diverged(format!("non-finite activation in {stage}")))
            }
            Err(e) => return Err(e.into()),
        };
        if !loss.is_finite() {
            return Err(self.diverged(format!("loss {loss}")));
        }
        let lr = self.current_lr();
        match self
            .adam
            .update(&mut self.model.params.tensors, &grads, &self.model.params.names, lr)
        {
            Ok(()) => {}
            Err(e @ DiffError::NonFiniteGradient { .. }) => return Err(self.diverged(e.to_string())),
            Err(e) => return Err(ModelError::from(e).into()),
        }
        self.loss_history.push(loss);
        self.step += 1;
        Ok(loss)
    }

    fn diverged(&self, reason: String) -> TrainError {
        TrainError::Diverged {
            step: self.step,
            reason,
            last_good: Box::new(self.checkpoint()),
        }
    }

    /// Runs until `step` (capped at the schedule length), calling `progress`
    /// after every update with the step count and loss.
    pub fn run_until(&mut self, step: u64, mut progress: impl FnMut(u64, f32)) -> Result<(), TrainError> {
        let stop = step.min(self.schedule.total_steps());
        while self.step < stop {
            let loss = self.train_step()?;
            progress(self.step, loss);
        }
        Ok(())
    }

    pub fn run(&mut self, progress: impl FnMut(u64, f32)) -> Result<(), TrainError> {
        self.run_until(self.schedule.total_steps(), progress)
    }
}

/// Trains from scratch over the whole schedule.
pub fn train(
    config: ModelConfig,
    code: LinearCode,
    schedule: TrainSchedule,
    seed: u64,
) -> Result<Checkpoint, TrainError> {
    let mut trainer = Trainer::new(config, code, schedule, seed)?;
    trainer.run(|_, _| {})?;
    Ok(trainer.checkpoint())
}

/// Moving average with a trailing window (shorter at the start).
pub fn smoothed(history: &[f32], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(history.len());
    let mut sum = 0.0;
    for (i, &v) in history.iter().enumerate() {
        sum += f64::from(v);
        if i >= window {
            sum -= f64::from(history[i - window]);
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}
