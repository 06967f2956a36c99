//! Experiment harness: configs, training runs, figures, sweeps, verification
//! suites and output writers for the `relaxbayes` binary.

pub mod config;
pub mod error;
pub mod figures;
pub mod output;
pub mod score;
pub mod sweep;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
