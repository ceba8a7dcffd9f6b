//! Numerical building blocks: quadrature, monotone inversion, statistics.

pub mod quad;
pub mod root;
pub mod stats;
