use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{LabeledDataset, Split};
use crate::nn::Matrix2D;
use crate::rng;
use crate::{Error, Result};

/// Stratified public set: `per_class` rows of every class present in the
/// pooled `sources`, ordered by class.
pub fn build_public_set(
    sources: &[&LabeledDataset],
    per_class: usize,
    seed: u64,
) -> Result<LabeledDataset> {
    if per_class == 0 {
        return Err(Error::Config(
            "public set needs at least one sample per class".into(),
        ));
    }
    let pooled = LabeledDataset::concat(sources)?;
    let mut rows = Vec::new();
    for class in pooled.classes() {
        let mut members: Vec<usize> = (0..pooled.len())
            .filter(|&i| pooled.labels[i] == class)
            .collect();
        if members.len() < per_class {
            return Err(Error::Config(format!(
                "class {class} has {} samples, public set needs {per_class}",
                members.len()
            )));
        }
        let mut r = rng::stream(seed, "public-set", class as u64);
        members.shuffle(&mut r);
        rows.extend_from_slice(&members[..per_class]);
    }
    let subset = pooled.subset(&rows);
    LabeledDataset::new(
        Matrix2D::new(subset.len(), subset.dim(), subset.samples.into_data())?,
        subset.labels,
        "public",
        Split::Train,
    )
}
