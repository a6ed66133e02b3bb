//! Inverse solvability and inverse security of over-the-air federated
//! learning forward models.
//!
//! The crate builds the random linear operators that map stacked client
//! updates to what a server (or an eavesdropper) receives, estimates their
//! expected condition numbers by Monte Carlo, and checks them against
//! closed-form bounds and security predicates.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod models;

pub use error::{Error, Result};
