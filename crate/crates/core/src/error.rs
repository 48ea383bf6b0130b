use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DimensionMismatch { expected: usize, found: usize },
    InvalidGraph(String),
    Disconnected,
    /// The matrix kernel is not one-dimensional.
    KernelDimension { found: usize },
    InvalidParameter { name: &'static str, reason: String },
    /// Bisection could not bracket the requested condition number.
    NoBracket { target: f64, reachable: f64 },
    FamilyTooLarge { members: usize, limit: usize },
    InvalidKernel(String),
    /// A schedule ran past its horizon without reaching the requested event.
    HorizonExhausted { horizon: usize },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::InvalidGraph(msg) => write!(f, "invalid graph: {msg}"),
            Error::Disconnected => write!(f, "graph is not connected"),
            Error::KernelDimension { found } => {
                write!(f, "kernel dimension is {found}, expected 1")
            }
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::NoBracket { target, reachable } => write!(
                f,
                "cannot reach condition number {target}: bracket tops out at {reachable}"
            ),
            Error::FamilyTooLarge { members, limit } => {
                write!(f, "family has {members} members, limit is {limit}")
            }
            Error::InvalidKernel(msg) => write!(f, "invalid Markov kernel: {msg}"),
            Error::HorizonExhausted { horizon } => {
                write!(f, "event not reached within horizon {horizon}")
            }
        }
    }
}

impl core::error::Error for Error {}
