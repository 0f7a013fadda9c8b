//! Contribution weights and aggregation rules.
//!
//! Each adaptation round gives every source client a weight that shrinks as
//! its distance to the target's upload grows, scaled so that the source
//! weights plus the target's data fraction `β` sum to one. A new domain
//! combines encoders and classifiers with their own weight vectors; new
//! classes combine encoders the same way and build the classifier channel by
//! channel.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::nn::{weighted_encoder_sum, weighted_layer_sum, Dense, SplitModel};
use crate::{Error, Result};

/// Tolerance on `Σ weights + β = 1` accepted by the aggregation rules.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Per-round aggregation weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionSet {
    pub round: usize,
    pub encoder_weights: Vec<f64>,
    /// `None` when the classifier is built by channel supplementation.
    pub classifier_weights: Option<Vec<f64>>,
    pub target_beta: f64,
}

impl ContributionSet {
    /// Largest deviation of `Σ w + β` from one over the weight vectors.
    pub fn mass_error(&self) -> f64 {
        let e = (self.encoder_weights.iter().sum::<f64>() + self.target_beta - 1.0).abs();
        match &self.classifier_weights {
            Some(c) => e.max((c.iter().sum::<f64>() + self.target_beta - 1.0).abs()),
            None => e,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .encoder_weights
            .iter()
            .chain(self.classifier_weights.iter().flatten())
            .chain(core::iter::once(&self.target_beta));
        for &w in all {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::Aggregation(format!("invalid weight {w}")));
            }
        }
        let err = self.mass_error();
        if err > WEIGHT_SUM_TOLERANCE {
            return Err(Error::Aggregation(format!(
                "weights plus target fraction miss one by {err:e}"
            )));
        }
        Ok(())
    }
}

/// `β = |D^T| / (|D^T| + Σ|D^S_n|)`.
pub fn target_fraction(source_sizes: &[usize], target_size: usize) -> f64 {
    let total: usize = source_sizes.iter().sum::<usize>() + target_size;
    target_size as f64 / total as f64
}

fn contributions(diffs: &[f64], source_sizes: &[usize], target_size: usize) -> Result<Vec<f64>> {
    if diffs.is_empty() {
        return Err(Error::Config("no source clients to weight".into()));
    }
    if diffs.len() != source_sizes.len() {
        return Err(Error::dim(
            "source size vector",
            diffs.len(),
            source_sizes.len(),
        ));
    }
    if source_sizes.contains(&0) {
        return Err(Error::Config("source client with an empty dataset".into()));
    }
    if let Some(d) = diffs.iter().find(|d| !(**d >= 0.0 && d.is_finite())) {
        return Err(Error::Input(format!(
            "distance must be finite and non-negative, got {d}"
        )));
    }
    let source_total: usize = source_sizes.iter().sum();
    let source_fraction = source_total as f64 / (source_total + target_size) as f64;
    let inverse: Vec<f64> = diffs.iter().map(|d| 1.0 / (1.0 + d)).collect();
    let norm: f64 = inverse.iter().sum();
    Ok(inverse.iter().map(|v| v / norm * source_fraction).collect())
}

/// Encoder weights from per-client feature distances.
pub fn encoder_contributions(
    diff_f: &[f64],
    source_sizes: &[usize],
    target_size: usize,
) -> Result<Vec<f64>> {
    contributions(diff_f, source_sizes, target_size)
}

/// Classifier weights from per-client classifier distances.
pub fn classifier_contributions(
    diff_c: &[f64],
    source_sizes: &[usize],
    target_size: usize,
) -> Result<Vec<f64>> {
    contributions(diff_c, source_sizes, target_size)
}

fn check_models(sources: &[&SplitModel], target: &SplitModel, weights: usize) -> Result<()> {
    if sources.is_empty() {
        return Err(Error::Config("no source models to aggregate".into()));
    }
    if sources.len() != weights {
        return Err(Error::dim("contribution vector", sources.len(), weights));
    }
    for s in sources {
        s.check_congruent(target, "aggregation")?;
    }
    Ok(())
}

fn with_target<'a>(sources: &[&'a SplitModel], target: &'a SplitModel) -> Vec<&'a SplitModel> {
    let mut all = sources.to_vec();
    all.push(target);
    all
}

fn with_beta(weights: &[f64], beta: f64) -> Vec<f64> {
    let mut all = weights.to_vec();
    all.push(beta);
    all
}

/// New-domain rule: encoder and classifier are each the contribution-weighted
/// sum of the source models plus `β` times the target model.
pub fn aggregate_domain(
    sources: &[&SplitModel],
    target: &SplitModel,
    cs: &ContributionSet,
) -> Result<SplitModel> {
    let classifier_weights = cs
        .classifier_weights
        .as_ref()
        .ok_or_else(|| Error::Aggregation("domain aggregation needs classifier weights".into()))?;
    check_models(sources, target, cs.encoder_weights.len())?;
    if classifier_weights.len() != sources.len() {
        return Err(Error::dim(
            "classifier contribution vector",
            sources.len(),
            classifier_weights.len(),
        ));
    }
    cs.validate()?;
    let all = with_target(sources, target);
    let classifiers: Vec<&Dense> = all.iter().map(|m| &m.classifier).collect();
    Ok(SplitModel {
        encoder: weighted_encoder_sum(&all, &with_beta(&cs.encoder_weights, cs.target_beta)),
        classifier: weighted_layer_sum(
            &classifiers,
            &with_beta(classifier_weights, cs.target_beta),
        ),
    })
}

/// Encoder half of the new-class rule; same convex combination as the domain
/// encoder.
pub fn aggregate_class_encoder(
    sources: &[&SplitModel],
    target: &SplitModel,
    encoder_weights: &[f64],
    beta: f64,
) -> Result<Vec<Dense>> {
    check_models(sources, target, encoder_weights.len())?;
    ContributionSet {
        round: 0,
        encoder_weights: encoder_weights.to_vec(),
        classifier_weights: None,
        target_beta: beta,
    }
    .validate()?;
    Ok(weighted_encoder_sum(
        &with_target(sources, target),
        &with_beta(encoder_weights, beta),
    ))
}

/// Channel-wise supplementation.
///
/// The source classifiers are first merged by data size. Channels of
/// `source_classes` are then copied from that merge, channels of
/// `target_classes` from the target classifier; channels in neither set keep
/// the source merge.
pub fn aggregate_class_classifier(
    sources: &[&SplitModel],
    target: &SplitModel,
    source_sizes: &[usize],
    source_classes: &[usize],
    target_classes: &[usize],
) -> Result<Dense> {
    check_models(sources, target, source_sizes.len())?;
    let k_total = target.k_total();
    let ks: BTreeSet<usize> = source_classes.iter().copied().collect();
    let kt: BTreeSet<usize> = target_classes.iter().copied().collect();
    if let Some(c) = ks.intersection(&kt).next() {
        return Err(Error::Config(format!(
            "class {c} claimed by both source and target"
        )));
    }
    if let Some(c) = ks.union(&kt).find(|&&c| c >= k_total) {
        return Err(Error::Config(format!(
            "class {c} outside the {k_total}-channel head"
        )));
    }
    let total: usize = source_sizes.iter().sum();
    if total == 0 {
        return Err(Error::Config("source clients hold no data".into()));
    }
    let size_weights: Vec<f64> = source_sizes
        .iter()
        .map(|&s| s as f64 / total as f64)
        .collect();
    let classifiers: Vec<&Dense> = sources.iter().map(|m| &m.classifier).collect();
    let mut merged = weighted_layer_sum(&classifiers, &size_weights);
    for &k in &kt {
        let (row, bias) = target.classifier.channel(k);
        merged.set_channel(k, row, bias);
    }
    Ok(merged)
}

/// Size-weighted parameter mean.
pub fn aggregate_fedavg(models: &[&SplitModel], sizes: &[usize]) -> Result<SplitModel> {
    let first = models
        .first()
        .ok_or_else(|| Error::Config("no models to average".into()))?;
    if models.len() != sizes.len() {
        return Err(Error::dim("size vector", models.len(), sizes.len()));
    }
    for m in models {
        m.check_congruent(first, "fedavg")?;
    }
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::Config("clients hold no data".into()));
    }
    let weights: Vec<f64> = sizes.iter().map(|&s| s as f64 / total as f64).collect();
    let classifiers: Vec<&Dense> = models.iter().map(|m| &m.classifier).collect();
    Ok(SplitModel {
        encoder: weighted_encoder_sum(models, &weights),
        classifier: weighted_layer_sum(&classifiers, &weights),
    })
}
