//! Bahadur representation of sample quantiles for functionals `g(Y)` of
//! stationary Gaussian sequences with power-law correlations.
//!
//! Modules follow the pipeline: [`hermite`] and [`functionals`] describe the
//! indicator functionals `h_u`, [`gaussproc`] simulates `Y`, [`asymptotics`]
//! holds the closed-form rates and constants, [`quantiles`] measures one
//! path, and [`experiments`] runs seeded Monte-Carlo studies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod functionals;
pub mod gaussproc;
pub mod hermite;
pub mod quantiles;
pub mod special;

pub use error::{Error, Result};
