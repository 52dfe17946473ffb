//! Epoch loop: shuffle, augment, encode, loss, backpropagate, step, update
//! the memory bank.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::augment::{augment, AugmentationSpec, SampleShape};
use crate::bank::{bank_update, MemoryBank};
use crate::encoder::{backward, forward, sgd_momentum_step, EncoderParams};
use crate::error::{IdfdError, Result};
use crate::linalg::{norm, Matrix};
use crate::losses::{combined_loss, FeatureLossConfig, InstanceLossConfig, LossMode};
use crate::metrics::ClusterScores;
use crate::rng::{shuffled_indices, SeededRng};

/// Step decay: `lr0` until `warm_epochs`, then ×`factor` at `warm_epochs`
/// and every `decay_every` epochs after it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrSchedule {
    pub warm_epochs: usize,
    pub decay_every: usize,
    pub factor: f64,
}

impl LrSchedule {
    /// 600 warm epochs, then ×0.1 every 350.
    pub const FULL_SCALE: LrSchedule = LrSchedule {
        warm_epochs: 600,
        decay_every: 350,
        factor: 0.1,
    };

    /// The full-scale shape compressed to a 200-epoch run.
    pub const DESK_SCALE: LrSchedule = LrSchedule {
        warm_epochs: 120,
        decay_every: 40,
        factor: 0.1,
    };

    pub fn decays_before(&self, epoch: usize) -> usize {
        if epoch < self.warm_epochs {
            0
        } else {
            1 + (epoch - self.warm_epochs) / self.decay_every
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr0: f64,
    pub momentum_beta: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub tau: f64,
    pub tau2: f64,
    pub alpha: f64,
    pub bank_momentum: f64,
    pub schedule: LrSchedule,
    /// Hidden layer widths; empty means a single linear layer.
    pub hidden: Vec<usize>,
    /// Representation dimension.
    pub dim: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// Desk-scale defaults.
    pub fn new(seed: u64) -> Self {
        Self {
            lr0: 0.03,
            momentum_beta: 0.9,
            batch_size: 64,
            epochs: 200,
            tau: 1.0,
            tau2: 2.0,
            alpha: 1.0,
            bank_momentum: 0.5,
            schedule: LrSchedule::DESK_SCALE,
            hidden: vec![128],
            dim: 32,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(IdfdError::Config(msg));
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return fail(format!("lr0 must be >= 0, got {}", self.lr0));
        }
        if !(0.0..1.0).contains(&self.momentum_beta) {
            return fail(format!("momentum_beta must be in [0, 1), got {}", self.momentum_beta));
        }
        if self.batch_size < 2 {
            return fail(format!("batch_size must be >= 2, got {}", self.batch_size));
        }
        if !(0.0..=1.0).contains(&self.bank_momentum) {
            return fail(format!("bank_momentum must be in [0, 1], got {}", self.bank_momentum));
        }
        if self.schedule.decay_every == 0 || !(self.schedule.factor > 0.0) {
            return fail("schedule needs decay_every >= 1 and factor > 0".into());
        }
        if self.dim == 0 || self.hidden.contains(&0) {
            return fail("layer widths must be positive".into());
        }
        InstanceLossConfig::new(self.tau).map_err(|e| IdfdError::Config(e.to_string()))?;
        FeatureLossConfig::new(self.tau2, self.alpha).map_err(|e| IdfdError::Config(e.to_string()))?;
        Ok(())
    }

    /// Encoder layer widths for inputs of length `input`.
    pub fn layer_dims(&self, input: usize) -> Vec<usize> {
        let mut dims = vec![input];
        dims.extend(&self.hidden);
        dims.push(self.dim);
        dims
    }
}

pub fn lr_at_epoch(cfg: &TrainConfig, epoch: usize) -> f64 {
    let decays = cfg.schedule.decays_before(epoch);
    cfg.lr0 * cfg.schedule.factor.powi(decays as i32)
}

/// `(first epoch, lr)` for every distinct rate within `0..epochs`.
pub fn schedule_table(cfg: &TrainConfig, epochs: usize) -> Vec<(usize, f64)> {
    let mut table: Vec<(usize, f64)> = Vec::new();
    for epoch in 0..epochs {
        let lr = lr_at_epoch(cfg, epoch);
        if table.last().is_none_or(|&(_, prev)| prev != lr) {
            table.push((epoch, lr));
        }
    }
    table
}

/// Summary of one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean objective per optimized batch.
    pub loss: f64,
    /// Instance term per sample and feature term per batch, unweighted.
    pub components: BTreeMap<String, f64>,
    pub scores: Option<ClusterScores>,
}

/// Everything needed to continue or inspect a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub params: EncoderParams,
    pub velocity: EncoderParams,
    pub bank: MemoryBank,
    pub rng: SeededRng,
    /// Epochs completed.
    pub epoch: usize,
}

impl TrainState {
    /// Fresh encoder and bank for `n` samples of length `input`.
    pub fn init(n: usize, input: usize, cfg: &TrainConfig) -> Result<Self> {
        let root = SeededRng::new(cfg.seed);
        let params = EncoderParams::init(&cfg.layer_dims(input), &mut root.derive(0))?;
        let bank = MemoryBank::random(n, cfg.dim, cfg.bank_momentum, &mut root.derive(1))?;
        Ok(Self {
            velocity: params.zeros_like(),
            params,
            bank,
            rng: root.derive(2),
            epoch: 0,
        })
    }
}

pub struct TrainOutcome {
    pub state: TrainState,
    pub history: Vec<EpochRecord>,
}

/// Called after every epoch with the new state and its record, before the
/// record is appended to the history; may fill in `scores`.
pub type EpochHook<'a> = dyn FnMut(&TrainState, &mut EpochRecord) -> Result<()> + 'a;

pub fn train(
    x: &Matrix,
    shape: SampleShape,
    cfg: &TrainConfig,
    spec: &AugmentationSpec,
    mode: LossMode,
) -> Result<TrainOutcome> {
    train_with(x, shape, cfg, spec, mode, &mut |_, _| Ok(()))
}

pub fn train_with(
    x: &Matrix,
    shape: SampleShape,
    cfg: &TrainConfig,
    spec: &AugmentationSpec,
    mode: LossMode,
    hook: &mut EpochHook<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if x.rows() == 0 {
        return Err(IdfdError::EmptyInput("training set has no samples".into()));
    }
    let state = TrainState::init(x.rows(), x.cols(), cfg)?;
    resume(x, shape, cfg, spec, mode, state, hook)
}

/// Runs the remaining epochs of `state`.
pub fn resume(
    x: &Matrix,
    shape: SampleShape,
    cfg: &TrainConfig,
    spec: &AugmentationSpec,
    mode: LossMode,
    mut state: TrainState,
    hook: &mut EpochHook<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if x.cols() != shape.len() {
        return Err(IdfdError::ShapeMismatch(format!(
            "samples have {} values, shape {:?} needs {}",
            x.cols(),
            shape,
            shape.len()
        )));
    }
    if state.bank.len() != x.rows() {
        return Err(IdfdError::ShapeMismatch(format!(
            "bank has {} rows for {} samples",
            state.bank.len(),
            x.rows()
        )));
    }
    let cfg_i = InstanceLossConfig::new(cfg.tau)?;
    let cfg_f = FeatureLossConfig::new(cfg.tau2, cfg.alpha)?;
    let mut history = Vec::with_capacity(cfg.epochs.saturating_sub(state.epoch));

    while state.epoch < cfg.epochs {
        let epoch = state.epoch;
        let lr = lr_at_epoch(cfg, epoch);
        let order = shuffled_indices(x.rows(), &mut state.rng);
        let mut loss_total = 0.0;
        let mut batches = 0usize;
        let mut samples = 0usize;
        let mut sums: BTreeMap<String, f64> = BTreeMap::new();

        // A trailing batch of one sample has no feature statistics; skip it.
        for chunk in order.chunks(cfg.batch_size).filter(|c| c.len() >= 2) {
            let mut data = Vec::with_capacity(chunk.len() * x.cols());
            for &i in chunk {
                data.extend(augment(x.row(i), shape, spec, &mut state.rng)?);
            }
            let xb = Matrix::new(chunk.len(), x.cols(), data)?;
            let (v, cache) = forward(&state.params, &xb)?;
            let report = combined_loss(&v, &state.bank, chunk, &cfg_i, &cfg_f, mode)?;
            if !report.value.is_finite() {
                return Err(IdfdError::DomainError(format!(
                    "non-finite loss at epoch {epoch}"
                )));
            }
            let grad_v = report.grad.scale(1.0 / chunk.len() as f64);
            let grads = backward(&state.params, &cache, &grad_v)?;
            sgd_momentum_step(&mut state.params, &grads, &mut state.velocity, lr, cfg.momentum_beta)?;
            bank_update(&mut state.bank, chunk, &v, cfg.bank_momentum)?;

            loss_total += report.value / chunk.len() as f64;
            batches += 1;
            samples += chunk.len();
            for (name, value) in &report.components {
                *sums.entry((*name).to_string()).or_default() += value;
            }
        }

        for (r, row) in state.bank.rows().iter_rows().enumerate() {
            if (norm(row) - 1.0).abs() > 1e-9 {
                return Err(IdfdError::DomainError(format!(
                    "bank row {r} drifted to norm {}",
                    norm(row)
                )));
            }
        }

        let components = sums
            .into_iter()
            .map(|(name, total)| {
                let per = if name == crate::losses::INSTANCE {
                    samples.max(1)
                } else {
                    batches.max(1)
                };
                (name, total / per as f64)
            })
            .collect();
        state.epoch += 1;
        let mut record = EpochRecord {
            epoch,
            lr,
            loss: loss_total / batches.max(1) as f64,
            components,
            scores: None,
        };
        hook(&state, &mut record)?;
        history.push(record);
    }
    Ok(TrainOutcome { state, history })
}
