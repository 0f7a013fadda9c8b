//! File formats, reports and the command-line runner around `gains-core`.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
mod error;
pub mod report;

pub use error::{AppError, AppResult};
