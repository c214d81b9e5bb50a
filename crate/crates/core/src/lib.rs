//! Distributionally robust optimization over Sinkhorn-distance balls.
//!
//! The crate is `no_std` with `alloc`. It provides the Monte Carlo dual of the
//! Sinkhorn DRO problem, a bisection solver over the multiplier, worst-case
//! distribution sampling, an exact treatment of finite supports, and the
//! newsvendor, portfolio and semi-supervised classification applications.

#![no_std]
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments
)]
extern crate alloc;

pub mod apps;
pub mod cost;
pub mod data;
pub mod dual;
pub mod error;
pub mod finite_space;
pub mod kernel;
pub mod loss;
pub mod optimizer;
pub mod rng;
pub mod worstcase;

pub use cost::{compute_rho_bar, rho_from_rho_bar, CostKind, CostSpec, Mahalanobis};
pub use data::EmpiricalDistribution;
pub use error::{Error, Result};
pub use loss::{FeasibleSet, Loss};
pub use rng::SeedSpec;
