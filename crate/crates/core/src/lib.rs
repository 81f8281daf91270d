//! Exact and effective open-system dynamics for atoms coupled to strongly
//! damped cavity modes.

// `!(x > y)` is used on purpose so that NaN inputs are rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod elimination;
pub mod error;
pub mod harness;
pub mod operators;
pub mod pulse;
pub mod stirap;

pub use error::{Error, Result};
