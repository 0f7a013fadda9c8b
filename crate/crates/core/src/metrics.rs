//! Per-round evaluation of a global model.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::LabeledDataset;
use crate::nn::{self, SplitModel};
use crate::training::{ClientState, Role};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    /// Accuracy on the target client's test set.
    pub t_acc: f64,
    /// Unweighted mean of the per-source-client test accuracies.
    pub s_acc: f64,
    /// Sample-weighted accuracy over the pooled source test sets.
    pub s_acc_weighted: f64,
    /// Accuracy on the pooled union of every client's test set.
    pub g_acc: f64,
    /// Cross-entropy over the pooled training sets.
    pub global_loss: f64,
    /// Norm of the gradient of `global_loss`.
    pub grad_norm: f64,
}

/// Number of correctly classified rows.
pub fn correct(model: &SplitModel, ds: &LabeledDataset) -> Result<usize> {
    if ds.is_empty() {
        return Ok(0);
    }
    let pred = nn::predict(model, &ds.samples)?;
    Ok(pred.iter().zip(&ds.labels).filter(|(p, y)| p == y).count())
}

pub fn accuracy(model: &SplitModel, ds: &LabeledDataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::Input("accuracy of an empty dataset".into()));
    }
    Ok(correct(model, ds)? as f64 / ds.len() as f64)
}

/// Mean cross-entropy and its gradient norm over the pooled training sets.
pub fn pooled_loss(model: &SplitModel, clients: &[&ClientState]) -> Result<(f64, f64)> {
    let trains: Vec<&LabeledDataset> = clients.iter().map(|c| &c.train).collect();
    let pooled = LabeledDataset::concat(&trains)?;
    let (l, g) = nn::loss_and_grad(model, &pooled.samples, &pooled.labels, None)?;
    Ok((l, g.norm()))
}

/// Accuracy of every source client's test set, in order.
pub fn source_accuracies(model: &SplitModel, clients: &[&ClientState]) -> Result<Vec<f64>> {
    clients
        .iter()
        .filter(|c| c.role == Role::Source)
        .map(|c| accuracy(model, &c.test))
        .collect()
}

/// T-Acc, S-Acc and G-Acc of `model`, plus the pooled training loss.
///
/// `clients` must contain exactly one target client and at least one source
/// client, all with non-empty test splits.
pub fn evaluate(
    model: &SplitModel,
    clients: &[&ClientState],
    round: usize,
) -> Result<RoundMetrics> {
    let target = {
        let mut targets = clients.iter().filter(|c| c.role == Role::Target);
        match (targets.next(), targets.next()) {
            (Some(t), None) => t,
            (None, _) => return Err(Error::Config("evaluation needs a target client".into())),
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "evaluation expects a single target client".into(),
                ))
            }
        }
    };
    let mut per_source = Vec::new();
    let (mut src_correct, mut src_total) = (0, 0);
    for c in clients.iter().filter(|c| c.role == Role::Source) {
        if c.test.is_empty() {
            return Err(Error::Config(alloc::format!(
                "client {} has no test data",
                c.id
            )));
        }
        let k = correct(model, &c.test)?;
        per_source.push(k as f64 / c.test.len() as f64);
        src_correct += k;
        src_total += c.test.len();
    }
    if per_source.is_empty() {
        return Err(Error::Config(
            "evaluation needs at least one source client".into(),
        ));
    }
    if target.test.is_empty() {
        return Err(Error::Config("target client has no test data".into()));
    }
    let tgt_correct = correct(model, &target.test)?;
    let (global_loss, grad_norm) = pooled_loss(model, clients)?;
    Ok(RoundMetrics {
        round,
        t_acc: tgt_correct as f64 / target.test.len() as f64,
        s_acc: per_source.iter().sum::<f64>() / per_source.len() as f64,
        s_acc_weighted: src_correct as f64 / src_total as f64,
        g_acc: (src_correct + tgt_correct) as f64 / (src_total + target.test.len()) as f64,
        global_loss,
        grad_norm,
    })
}
