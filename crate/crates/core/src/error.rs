use alloc::string::String;
use core::fmt;

use crate::profile::PartitionSize;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Failures surfaced by planning, simulation and metrics code.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A numeric parameter is outside its valid domain.
    Parameter(String),
    /// Input data is structurally malformed (grid holes, duplicates, bad rows).
    Format(String),
    /// Input data is well formed but violates a value constraint.
    Validation(String),
    /// A (partition size, batch) cell is not in the profile grid.
    Lookup { k: PartitionSize, batch: u32 },
    /// A profile cell that must be divided by has zero throughput.
    ZeroThroughput { k: PartitionSize, batch: u32 },
    /// All ratios are zero, or a distribution has no mass.
    Degenerate(String),
    /// An input collection that must be nonempty is empty.
    EmptyInput(&'static str),
    /// A plan cannot be placed on the physical GPUs.
    Infeasible(String),
    /// The simulation was configured with nothing to run on.
    Configuration(String),
    /// An internal consistency check failed during a simulation.
    Consistency(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Parameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Validation(msg) => write!(f, "validation error: {msg}"),
            Error::Lookup { k, batch } => {
                write!(f, "no profile entry for partition {k} at batch {batch}")
            }
            Error::ZeroThroughput { k, batch } => {
                write!(f, "zero throughput for partition {k} at batch {batch}")
            }
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::Infeasible(msg) => write!(f, "infeasible plan: {msg}"),
            Error::Configuration(msg) => write!(f, "configuration error: {msg}"),
            Error::Consistency(msg) => write!(f, "consistency check failed: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
