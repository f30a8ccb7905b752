//! Crate-wide error type.

use std::fmt;

/// Errors surfaced by encoding, decoding and simulation routines.
#[derive(Debug, Clone, PartialEq)]
pub enum CsgqError {
    /// An argument violates a documented precondition.
    InvalidArgument(String),
    /// A mathematical precondition (e.g. a restricted-isometry threshold)
    /// does not hold, so the requested quantity is undefined.
    PreconditionViolated(String),
    /// Exhaustive subset enumeration would exceed the configured cap.
    SubsetCapExceeded { subsets: u128, cap: u128 },
    /// Received data is internally inconsistent (conflicting duplicate
    /// codes, malformed packet).
    DataIntegrity(String),
    /// No measurement data survived the channel; nothing to decode.
    NoData,
    /// A least-squares subproblem is rank deficient.
    RankDeficient,
}

impl fmt::Display for CsgqError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CsgqError::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            CsgqError::PreconditionViolated(msg) => write!(f, "precondition violated: {msg}"),
            CsgqError::SubsetCapExceeded { subsets, cap } => {
                write!(f, "subset enumeration ({subsets}) exceeds cap ({cap})")
            }
            CsgqError::DataIntegrity(msg) => write!(f, "data integrity: {msg}"),
            CsgqError::NoData => write!(f, "no received data to decode"),
            CsgqError::RankDeficient => write!(f, "rank-deficient least-squares system"),
        }
    }
}

impl std::error::Error for CsgqError {}

pub type Result<T> = std::result::Result<T, CsgqError>;
