//! Sharpness-aware minimization seen as relaxed variational Bayes.
//!
//! Modules:
//! - [`nn`]: logistic regression and MLPs over flat parameter vectors;
//! - [`optim`]: SGD, Adam, SAM variants and bSAM with m-sharpness;
//! - [`conjugate`]: Gaussian coordinates, conjugates, biconjugates, cutting planes and the BLR;
//! - [`posterior`]: Gaussian posteriors, ELBO, predictive averaging, grid oracle, Laplace;
//! - [`metrics`]: accuracy, NLL, ECE and AUROC;
//! - [`data`]: synthetic datasets and IDX ingestion.

pub mod conjugate;
pub mod data;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod numeric;
pub mod optim;
pub mod posterior;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
