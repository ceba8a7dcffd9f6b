use thiserror::Error;

use crate::duality::ConsistencyReport;
use crate::expr::{EvalError, ParseError};
use crate::numeric::quad::QuadError;
use crate::numeric::root::RootError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("unknown catalog entry `{0}`")]
    UnknownCatalogEntry(String),
    #[error("missing parameter `{0}`")]
    MissingParameter(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("utility is not strictly increasing near x = {x}")]
    NotMonotone { x: f64 },
    #[error("inversion failed: {0}")]
    Inversion(#[from] RootError),
    #[error("quadrature failed: {0}")]
    Quadrature(#[from] QuadError),
    #[error("diffusion vanishes or is negative at x = {x} (b_x = {value})")]
    VanishingDiffusion { x: f64, value: f64 },
    #[error("dynamic has no utility representation: implied ratio varies by {} on the grid", .0.residual)]
    Inconsistent(Box<ConsistencyReport>),
    #[error("supplied a_u/b_u = {supplied} does not match the ratio {inferred} implied by the dynamic")]
    RatioMismatch { supplied: f64, inferred: f64 },
    #[error("value {value} at step {step} lies outside the utility domain")]
    OutsideDomain { step: usize, value: f64 },
    #[error("path {path} aborted at step {step}: {reason}")]
    PathAborted { path: usize, step: usize, reason: String },
    #[error("only {blocks} blocks fit in the path; at least {required} are needed")]
    TooFewBlocks { blocks: usize, required: usize },
    #[error("increments were measured over different time spans")]
    MismatchedDeltaT,
    #[error("density integrates to {total}, not 1 (mass outside the utility range)")]
    Normalization { total: f64 },
    #[error("sample {value} lies outside the density support")]
    OutsideSupport { value: f64 },
    #[error("{0}")]
    NotInFamily(String),
}

impl Error {
    pub(crate) fn param(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed or out-of-range inputs, as opposed
    /// to failures of the mathematics on valid inputs.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::UnknownCatalogEntry(_)
                | Error::MissingParameter(_)
                | Error::InvalidParameter { .. }
                | Error::InvalidDomain(_)
                | Error::InvalidSpec(_)
                | Error::InvalidConfig(_)
                | Error::RatioMismatch { .. }
                | Error::TooFewBlocks { .. }
                | Error::MismatchedDeltaT
        )
    }
}
