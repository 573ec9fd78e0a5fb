use thiserror::Error;

use crate::model::ClassId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("class {id}: deadline cannot be met (E = C - D = {e} >= 0)")]
    DeadlineInfeasible { id: ClassId, e: f64 },

    #[error("zero slots assigned (sM = {s_map}, sR = {s_reduce})")]
    ZeroSlots { s_map: f64, s_reduce: f64 },

    #[error("infeasible: minimum demand {min_demand} exceeds capacity {capacity}")]
    Infeasible { min_demand: f64, capacity: f64 },

    #[error("class {id}: bid {bid} outside [{low}, {high}]")]
    InvalidBid {
        id: ClassId,
        bid: f64,
        low: f64,
        high: f64,
    },

    #[error("class {id}: assigned {r} VMs below guaranteed minimum {r_low}")]
    ProtocolViolation { id: ClassId, r: f64, r_low: f64 },

    #[error("brute force limited to {max} classes, got {n}")]
    TooManyClasses { n: usize, max: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code for the CLI error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid-parameter",
            Error::DeadlineInfeasible { .. } => "deadline-infeasible-class",
            Error::ZeroSlots { .. } => "zero-slots",
            Error::Infeasible { .. } => "infeasible",
            Error::InvalidBid { .. } => "invalid-bid",
            Error::ProtocolViolation { .. } => "protocol-violation",
            Error::TooManyClasses { .. } => "too-many-classes",
            Error::Precondition(_) => "precondition",
            Error::Format(_) => "invalid-input",
            Error::Io(_) => "io",
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
