//! Experiment harness for `sinkhorn-dro`.
//!
//! Reads experiment configurations (TOML or JSON), runs K-fold
//! cross-validation over hyper-parameter grids, evaluates out-of-sample
//! performance over repeated trials and exports CSV rows plus a JSON summary.
//! Also hosts the file formats the core crate leaves out: conic-program files,
//! CSV datasets and the command-line front end.

#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]

pub mod benchmark;
pub mod cli;
pub mod config;
pub mod cv;
pub mod error;
pub mod eval;
pub mod grid;
pub mod io;
pub mod methods;

pub use config::{App, ExperimentConfig, Method};
pub use error::{HarnessError, Result};
