//! Labelled datasets: synthetic multi-domain generators, IDX parsing,
//! Dirichlet partitioning and the server's public set.

mod idx;
mod partition;
mod public;
mod synthetic;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use idx::{
    encode_idx_images, encode_idx_labels, parse_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC,
};
pub use partition::{dirichlet_partition, PartitionPlan};
pub use public::build_public_set;
pub use synthetic::{generate_classes, generate_synthetic, ClusterLayout, DomainSpec, Transform};

use crate::nn::Matrix2D;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Feature rows with one class label each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub samples: Matrix2D,
    pub labels: Vec<usize>,
    pub domain: String,
    pub split: Split,
}

impl LabeledDataset {
    pub fn new(
        samples: Matrix2D,
        labels: Vec<usize>,
        domain: impl Into<String>,
        split: Split,
    ) -> Result<Self> {
        if samples.rows() != labels.len() {
            return Err(Error::dim("dataset labels", samples.rows(), labels.len()));
        }
        Ok(LabeledDataset {
            samples,
            labels,
            domain: domain.into(),
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    /// Distinct labels, ascending.
    pub fn classes(&self) -> Vec<usize> {
        self.labels
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn class_histogram(&self, k_total: usize) -> Vec<usize> {
        let mut h = vec![0; k_total];
        for &l in &self.labels {
            if l < k_total {
                h[l] += 1;
            }
        }
        h
    }

    pub fn check_labels(&self, k_total: usize) -> Result<()> {
        match self.labels.iter().find(|&&l| l >= k_total) {
            Some(l) => Err(Error::Input(format!(
                "dataset {} has label {l} outside [0, {k_total})",
                self.domain
            ))),
            None => Ok(()),
        }
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: self.samples.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            domain: self.domain.clone(),
            split: self.split,
        }
    }

    /// Keeps only the rows whose label is in `classes`.
    pub fn filter_classes(&self, classes: &[usize]) -> LabeledDataset {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| classes.contains(&self.labels[i]))
            .collect();
        self.subset(&keep)
    }

    /// Stacks datasets with equal feature width; the result takes the first
    /// dataset's domain and split tags.
    pub fn concat(parts: &[&LabeledDataset]) -> Result<LabeledDataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Input("cannot concatenate zero datasets".into()))?;
        let cols = first.dim();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for p in parts {
            if p.dim() != cols {
                return Err(Error::dim("concatenated dataset width", cols, p.dim()));
            }
            data.extend_from_slice(p.samples.data());
            labels.extend_from_slice(&p.labels);
        }
        LabeledDataset::new(
            Matrix2D::new(labels.len(), cols, data)?,
            labels,
            first.domain.clone(),
            first.split,
        )
    }

    /// Per-class feature means; `None` for classes without samples.
    pub fn class_means(&self, k_total: usize) -> Vec<Option<Vec<f64>>> {
        let mut sums = vec![vec![0.0; self.dim()]; k_total];
        let counts = self.class_histogram(k_total);
        for (r, &l) in self.labels.iter().enumerate() {
            for (s, v) in sums[l].iter_mut().zip(self.samples.row(r)) {
                *s += v;
            }
        }
        sums.into_iter()
            .zip(counts)
            .map(|(s, c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
            .collect()
    }
}
