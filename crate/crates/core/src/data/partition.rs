use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Gamma;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::rng;
use crate::{Error, Result};

/// Disjoint assignment of dataset rows to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    /// Row indices per client, ascending.
    pub assignments: Vec<Vec<usize>>,
    pub alpha: f64,
}

impl PartitionPlan {
    pub fn n_clients(&self) -> usize {
        self.assignments.len()
    }

    /// Materialises client `client`'s shard.
    pub fn shard(&self, ds: &LabeledDataset, client: usize) -> LabeledDataset {
        ds.subset(&self.assignments[client])
    }
}

/// Label-skewed split: for every class, client proportions are drawn from
/// `Dirichlet(alpha, …, alpha)`.
///
/// Clients left empty by the draw each take one row from the currently
/// largest client, lowest client id first.
pub fn dirichlet_partition(
    ds: &LabeledDataset,
    n_clients: usize,
    alpha: f64,
    seed: u64,
) -> Result<PartitionPlan> {
    if n_clients == 0 {
        return Err(Error::Config("need at least one client".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Config(format!(
            "dirichlet alpha must be positive, got {alpha}"
        )));
    }
    if ds.len() < n_clients {
        return Err(Error::Config(format!(
            "{} samples cannot cover {n_clients} clients",
            ds.len()
        )));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::Config(format!("{e}")))?;
    let mut assignments: Vec<Vec<usize>> = vec![Vec::new(); n_clients];

    for class in ds.classes() {
        let mut members: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        let mut r = rng::stream(seed, "dirichlet-partition", class as u64);
        members.shuffle(&mut r);

        let draws: Vec<f64> = (0..n_clients).map(|_| r.sample(gamma)).collect();
        let total: f64 = draws.iter().sum();
        let props: Vec<f64> = if total > 0.0 {
            draws.iter().map(|d| d / total).collect()
        } else {
            vec![1.0 / n_clients as f64; n_clients]
        };

        let n = members.len();
        let mut cum = 0.0;
        let mut start = 0;
        for (c, p) in props.iter().enumerate() {
            cum += p;
            let end = if c + 1 == n_clients {
                n
            } else {
                (libm::round(cum * n as f64) as usize).clamp(start, n)
            };
            assignments[c].extend_from_slice(&members[start..end]);
            start = end;
        }
    }

    while let Some(empty) = assignments.iter().position(Vec::is_empty) {
        let donor = (0..n_clients)
            .max_by(|&a, &b| {
                assignments[a]
                    .len()
                    .cmp(&assignments[b].len())
                    .then(b.cmp(&a))
            })
            .expect("at least one client");
        let moved = assignments[donor]
            .pop()
            .expect("donor holds at least two rows");
        assignments[empty].push(moved);
    }
    for a in &mut assignments {
        a.sort_unstable();
    }
    Ok(PartitionPlan { assignments, alpha })
}
