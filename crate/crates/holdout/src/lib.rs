//! Hold-out size selection for cross-validation.
//!
//! Estimates a loss-vs-hold-out-size curve from three cheap CV anchors,
//! bounds the estimator variance with finite-sample constants, and picks the
//! hold-out size minimizing a mean-variance objective. See README.md for the
//! workflow and the `holdout` binary for the command-line interface.

pub mod curve;
pub mod cv;
pub mod dataset;
pub mod error;
pub mod models;
pub mod optimizer;
pub mod report;
pub mod rng;
pub mod sim;
pub mod sure;

pub use error::{Error, Result};
