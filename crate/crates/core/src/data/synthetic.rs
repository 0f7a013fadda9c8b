use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Split};
use crate::nn::Matrix2D;
use crate::rng;
use crate::{Error, Result};

/// Gaussian class clusters in `dim` dimensions.
///
/// Each class id owns a centre drawn from its own stream, so a subset of
/// classes always sees the same geometry as the full layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterLayout {
    pub dim: usize,
    pub classes: Vec<usize>,
    /// Norm of every class centre.
    pub radius: f64,
    /// Per-coordinate standard deviation around the centre.
    pub spread: f64,
    pub seed: u64,
}

impl ClusterLayout {
    pub fn center(&self, class: usize) -> Vec<f64> {
        let mut r = rng::stream(self.seed, "cluster-center", class as u64);
        let raw: Vec<f64> = (0..self.dim).map(|_| r.sample(StandardNormal)).collect();
        let norm = libm::sqrt(raw.iter().map(|v| v * v).sum::<f64>());
        raw.into_iter().map(|v| self.radius * v / norm).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("cluster layout needs dim >= 1".into()));
        }
        if !(self.spread >= 0.0 && self.spread.is_finite() && self.radius.is_finite()) {
            return Err(Error::Config(
                "cluster radius/spread must be finite, spread >= 0".into(),
            ));
        }
        let unique: BTreeSet<_> = self.classes.iter().collect();
        if unique.len() != self.classes.len() {
            return Err(Error::Config("cluster layout repeats a class id".into()));
        }
        let centers: Vec<Vec<f64>> = self.classes.iter().map(|&c| self.center(c)).collect();
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                let d2: f64 = centers[i]
                    .iter()
                    .zip(&centers[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                if d2 < 1e-18 {
                    return Err(Error::Config(format!(
                        "classes {} and {} share a cluster centre",
                        self.classes[i], self.classes[j]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Feature-space transform that turns the base layout into a domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    Identity,
    /// Rotates every coordinate plane `(0,1), (2,3), …` by `degrees`.
    Rotation {
        degrees: f64,
    },
    AffineScale {
        factor: f64,
    },
    AdditiveNoise {
        sigma: f64,
    },
    ChannelPermutation {
        perm: Vec<usize>,
    },
    /// `(1 − w)·x + w·b` for a fixed background vector `b` of norm `radius`.
    BackgroundBlend {
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub id: String,
    pub transform: Transform,
    /// Seeds the transform's own randomness (noise draws, background vector).
    pub seed: u64,
}

impl DomainSpec {
    pub fn identity(id: impl Into<String>) -> DomainSpec {
        DomainSpec {
            id: id.into(),
            transform: Transform::Identity,
            seed: 0,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let ok = match &self.transform {
            Transform::Identity => true,
            Transform::Rotation { degrees } => degrees.is_finite(),
            Transform::AffineScale { factor } => *factor > 0.0 && factor.is_finite(),
            Transform::AdditiveNoise { sigma } => *sigma >= 0.0 && sigma.is_finite(),
            Transform::ChannelPermutation { perm } => {
                perm.len() == dim
                    && perm.iter().collect::<BTreeSet<_>>().len() == dim
                    && perm.iter().all(|&p| p < dim)
            }
            Transform::BackgroundBlend { weight } => (0.0..=1.0).contains(weight),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "domain {}: transform parameters out of range: {:?}",
                self.id, self.transform
            )))
        }
    }

    fn apply(&self, samples: &mut Matrix2D, radius: f64) {
        let dim = samples.cols();
        match &self.transform {
            Transform::Identity => {}
            Transform::Rotation { degrees } => {
                if *degrees == 0.0 {
                    return;
                }
                let theta = degrees.to_radians();
                let (s, c) = (libm::sin(theta), libm::cos(theta));
                for r in 0..samples.rows() {
                    let row = samples.row_mut(r);
                    for p in 0..dim / 2 {
                        let (x, y) = (row[2 * p], row[2 * p + 1]);
                        row[2 * p] = c * x - s * y;
                        row[2 * p + 1] = s * x + c * y;
                    }
                }
            }
            Transform::AffineScale { factor } => {
                samples.data_mut().iter_mut().for_each(|v| *v *= factor);
            }
            Transform::AdditiveNoise { sigma } => {
                let mut r = rng::stream(self.seed, "domain-noise", 0);
                for v in samples.data_mut() {
                    let z: f64 = r.sample(StandardNormal);
                    *v += sigma * z;
                }
            }
            Transform::ChannelPermutation { perm } => {
                let mut tmp = vec![0.0; dim];
                for r in 0..samples.rows() {
                    let row = samples.row_mut(r);
                    for (t, &p) in tmp.iter_mut().zip(perm) {
                        *t = row[p];
                    }
                    row.copy_from_slice(&tmp);
                }
            }
            Transform::BackgroundBlend { weight } => {
                let mut r = rng::stream(self.seed, "domain-background", 0);
                let raw: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
                let norm = libm::sqrt(raw.iter().map(|v| v * v).sum::<f64>());
                let bg: Vec<f64> = raw.iter().map(|v| radius * v / norm).collect();
                for row in 0..samples.rows() {
                    for (v, b) in samples.row_mut(row).iter_mut().zip(&bg) {
                        *v = (1.0 - weight) * *v + weight * b;
                    }
                }
            }
        }
    }
}

/// `n` samples over all classes of `layout`, balanced to within one.
pub fn generate_synthetic(
    layout: &ClusterLayout,
    domain: &DomainSpec,
    n: usize,
    seed: u64,
    split: Split,
) -> Result<LabeledDataset> {
    if layout.classes.len() < 2 {
        return Err(Error::Config(
            "cluster layout needs at least two classes".into(),
        ));
    }
    generate_classes(layout, domain, &layout.classes, n, seed, split)
}

/// `n` samples cycling through `classes` (a subset of the layout's classes),
/// transformed into `domain`.
pub fn generate_classes(
    layout: &ClusterLayout,
    domain: &DomainSpec,
    classes: &[usize],
    n: usize,
    seed: u64,
    split: Split,
) -> Result<LabeledDataset> {
    layout.validate()?;
    domain.validate(layout.dim)?;
    if n == 0 {
        return Err(Error::Config("requested zero samples".into()));
    }
    if classes.is_empty() {
        return Err(Error::Config("no classes requested".into()));
    }
    if let Some(c) = classes.iter().find(|c| !layout.classes.contains(c)) {
        return Err(Error::Config(format!(
            "class {c} is not part of the layout"
        )));
    }
    let centers: Vec<Vec<f64>> = classes.iter().map(|&c| layout.center(c)).collect();
    let mut r = rng::stream(seed, "synthetic-sample", 0);
    let mut data = Vec::with_capacity(n * layout.dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let slot = i % classes.len();
        labels.push(classes[slot]);
        for &m in &centers[slot] {
            let z: f64 = r.sample(StandardNormal);
            data.push(m + layout.spread * z);
        }
    }
    let mut samples = Matrix2D::new(n, layout.dim, data)?;
    domain.apply(&mut samples, layout.radius);
    LabeledDataset::new(samples, labels, domain.id.clone(), split)
}
