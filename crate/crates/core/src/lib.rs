//! Utility functions, Itô wealth dynamics and the transforms between them,
//! with simulation-based growth-rate estimators, a time-based decision
//! criterion and the implied wealth distribution.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod duality;
pub mod ergodic;
pub mod error;
pub mod expr;
pub mod functions;
pub mod numeric;
pub mod sde;

pub use error::{Error, Result};
