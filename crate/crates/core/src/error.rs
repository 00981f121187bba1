use thiserror::Error;

use crate::model::BusId;

/// Broad failure class, used by callers (e.g. the CLI) to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed or invalid input data.
    Input,
    /// The request is well-formed but has no feasible answer.
    Infeasible,
    /// An internal invariant was violated; indicates a bug.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid case: {0}")]
    InvalidCase(String),
    #[error("unknown bus reference {0}")]
    UnknownBus(BusId),
    #[error("unknown line reference ({0},{1})")]
    UnknownLine(BusId, BusId),
    #[error("unknown meter id {0:?}")]
    UnknownMeter(String),
    #[error("zero/negative reactance on line ({0},{1})")]
    BadReactance(BusId, BusId),
    #[error("disconnected network: buses {0:?} unreachable from the reference bus")]
    Disconnected(Vec<BusId>),
    #[error("unsupported meter kind: PMU (out of scope), meter {0:?}")]
    PmuMeter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("unobservable system: buses {buses:?} cannot be estimated")]
    Unobservable {
        /// Nonzero vector c with Hc = 0 certifying the missing rank.
        certificate: Vec<f64>,
        /// Buses on which the certificate is nonzero.
        buses: Vec<BusId>,
    },
    #[error("infeasible: target buses {unreachable:?} not reachable through measured lines")]
    TargetsUnreachable { unreachable: Vec<BusId> },
    #[error("infeasible: no observable subnetwork covers the targets {targets:?}")]
    NoPlan { targets: Vec<BusId> },
    #[error("attack impossible under secured set: barrier of secured lines {barrier:?} joins the reference to the targets")]
    AttackImpossible { barrier: Vec<(BusId, BusId)> },
    #[error("solver timed out without an incumbent")]
    Timeout,
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Syntax { .. }
            | Error::InvalidCase(_)
            | Error::UnknownBus(_)
            | Error::UnknownLine(_, _)
            | Error::UnknownMeter(_)
            | Error::BadReactance(_, _)
            | Error::Disconnected(_)
            | Error::PmuMeter(_)
            | Error::Dimension { .. } => ErrorClass::Input,
            Error::Unobservable { .. }
            | Error::TargetsUnreachable { .. }
            | Error::NoPlan { .. }
            | Error::AttackImpossible { .. } => ErrorClass::Infeasible,
            Error::Timeout | Error::Internal(_) => ErrorClass::Internal,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
