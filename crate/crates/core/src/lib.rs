//! Federated domain adaptation for clients that join an existing federation.
//!
//! When a new client arrives, the server lets it fine-tune the current global
//! model, then compares the result against the source model on a public
//! dataset to decide whether the newcomer brings new classes, a new domain, or
//! nothing new. The verdict selects the aggregation rule used for the
//! following adaptation rounds: contribution-weighted averaging for a new
//! domain, or channel-wise classifier supplementation for new classes. Source
//! clients train with a proximal pull towards their pre-arrival models so the
//! federation does not forget what it already knew.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, configuration files
//! and the command-line runner live in the `gains` companion crate.
//!
//! Module map:
//!
//! - [`nn`]: dense encoder/classifier models, analytic gradients, SGD.
//! - [`data`]: synthetic multi-domain generators, IDX parsing, Dirichlet
//!   partitioning and the server's public set.
//! - [`discovery`]: feature/classifier/encoder distances and the verdict rule.
//! - [`aggregation`]: contribution weights and the aggregation rules.
//! - [`training`]: local client updates with the anti-forgetting term.
//! - [`orchestrator`]: bootstrap, admission, adaptation rounds, baselines.
//! - [`metrics`]: T-Acc / S-Acc / G-Acc evaluation.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod aggregation;
pub mod data;
pub mod discovery;
mod error;
pub mod metrics;
pub mod nn;
pub mod orchestrator;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
