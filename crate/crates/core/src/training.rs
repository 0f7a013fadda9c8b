//! Local client updates.
//!
//! Source clients minimise cross-entropy plus `λ‖W − W_memory‖²`, where the
//! memory model is their snapshot from before the newcomer arrived. Target
//! clients train on plain cross-entropy.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::nn::{self, Proximal, SplitModel};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Source,
    Target,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientState {
    pub id: usize,
    pub role: Role,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub model: SplitModel,
    /// Snapshot taken before the current newcomer arrived.
    pub memory_model: SplitModel,
    pub lambda: f64,
    pub batch_size: usize,
    pub eta: f64,
}

impl ClientState {
    pub fn schedule(&self, epochs: usize) -> Schedule {
        Schedule {
            epochs,
            batch_size: self.batch_size,
            eta: self.eta,
        }
    }
}

/// Result of a run of mini-batch SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalRun {
    pub model: SplitModel,
    pub steps: usize,
    /// Mean mini-batch loss of every epoch.
    pub epoch_losses: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub epochs: usize,
    pub batch_size: usize,
    pub eta: f64,
}

/// Mini-batch SGD; each epoch visits `train` in a fresh Fisher–Yates order
/// drawn from `(seed, stream_index)`.
pub fn local_sgd(
    start: &SplitModel,
    train: &LabeledDataset,
    schedule: Schedule,
    reg: Option<Proximal<'_>>,
    seed: u64,
    stream_index: u64,
) -> Result<LocalRun> {
    let Schedule {
        epochs,
        batch_size,
        eta,
    } = schedule;
    if train.is_empty() {
        return Err(Error::Config("client has an empty training set".into()));
    }
    if epochs == 0 {
        return Err(Error::Config(
            "local training needs at least one epoch".into(),
        ));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut model = start.clone();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut r = rng::stream(seed, "local-shuffle", stream_index);
    let mut steps = 0;
    let mut epoch_losses = Vec::with_capacity(epochs);
    let mut labels = Vec::with_capacity(batch_size.min(train.len()));
    for _ in 0..epochs {
        order.shuffle(&mut r);
        let mut total = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(batch_size) {
            let x = train.samples.select_rows(chunk);
            labels.clear();
            labels.extend(chunk.iter().map(|&i| train.labels[i]));
            let (l, g) = nn::loss_and_grad(&model, &x, &labels, reg)?;
            model = nn::sgd_step(&model, &g, eta)?;
            total += l;
            batches += 1;
            steps += 1;
        }
        epoch_losses.push(total / batches as f64);
    }
    Ok(LocalRun {
        model,
        steps,
        epoch_losses,
    })
}

/// `epochs` of SGD on cross-entropy plus the pull towards the memory model.
pub fn train_source_local(c: &ClientState, epochs: usize, seed: u64) -> Result<SplitModel> {
    if c.role != Role::Source {
        return Err(Error::Precondition(format!(
            "client {} is not a source client",
            c.id
        )));
    }
    if !(c.lambda >= 0.0 && c.lambda.is_finite()) {
        return Err(Error::Config(format!(
            "lambda must be non-negative, got {}",
            c.lambda
        )));
    }
    let reg = (c.lambda > 0.0).then_some(Proximal {
        lambda: c.lambda,
        anchor: &c.memory_model,
    });
    local_sgd(
        &c.model,
        &c.train,
        c.schedule(epochs),
        reg,
        seed,
        c.id as u64,
    )
    .map(|run| run.model)
}

/// `epochs` of plain cross-entropy SGD; `lambda` is ignored.
pub fn train_target_local(c: &ClientState, epochs: usize, seed: u64) -> Result<SplitModel> {
    if c.role != Role::Target {
        return Err(Error::Precondition(format!(
            "client {} is not the target client",
            c.id
        )));
    }
    local_sgd(
        &c.model,
        &c.train,
        c.schedule(epochs),
        None,
        seed,
        c.id as u64,
    )
    .map(|run| run.model)
}

/// `epochs` of SGD with a proximal pull of strength `mu` towards `anchor`,
/// regardless of role. Used by the FedProx baseline.
pub fn train_proximal(
    c: &ClientState,
    anchor: &SplitModel,
    mu: f64,
    epochs: usize,
    seed: u64,
) -> Result<SplitModel> {
    let reg = (mu > 0.0).then_some(Proximal { lambda: mu, anchor });
    local_sgd(
        &c.model,
        &c.train,
        c.schedule(epochs),
        reg,
        seed,
        c.id as u64,
    )
    .map(|run| run.model)
}

/// Stores the current model as the memory model.
pub fn snapshot_memory(c: &ClientState) -> ClientState {
    let mut next = c.clone();
    next.memory_model = c.model.clone();
    next
}
