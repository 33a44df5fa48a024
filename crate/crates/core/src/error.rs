//! Error type shared across the simulator.

use std::fmt;

/// Errors produced by configuration validation and simulation operations.
#[derive(Debug)]
pub enum Error {
    /// A configuration or fixture failed an invariant check.
    InvalidConfig(String),
    /// An interleave pattern violated the degradation placement rule or
    /// referenced an unknown cell kind.
    InvalidPattern(String),
    /// An operand exceeded the tree's operand width.
    OperandOutOfRange { operand: u64, width: u32 },
    /// A weight does not fit the configured bit width / signedness.
    WeightOutOfRange { weight: i64, bits: u32, signed: bool },
    /// An activation exceeded the configured activation precision.
    ActivationOutOfRange { activation: u64, bits: u32 },
    /// A compute operation was issued while the bank was in write mode
    /// (CIM enable is gated off during writes).
    ComputeWhileWriting,
    /// Exhaustive characterization requested over an intractable input space.
    IntractableExhaustive { input_bits: u32, limit: u32 },
    /// Cost constants missing for a cell kind used by the tree.
    MissingCostConstant(String),
    /// Tensor / layer shape mismatch.
    ShapeMismatch(String),
    /// Malformed input file; carries the 1-based line number when known.
    Parse { line: Option<u64>, message: String },
    Io(std::io::Error),
    Json(serde_json::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InvalidPattern(msg) => write!(f, "invalid interleave pattern: {msg}"),
            Error::OperandOutOfRange { operand, width } => {
                write!(f, "operand {operand} does not fit in {width} bits")
            }
            Error::WeightOutOfRange { weight, bits, signed } => {
                let kind = if *signed { "signed" } else { "unsigned" };
                write!(f, "weight {weight} does not fit {bits}-bit {kind} storage")
            }
            Error::ActivationOutOfRange { activation, bits } => {
                write!(f, "activation {activation} does not fit in {bits} bits")
            }
            Error::ComputeWhileWriting => {
                write!(f, "compute cycle rejected: bank is in write mode")
            }
            Error::IntractableExhaustive { input_bits, limit } => write!(
                f,
                "exhaustive characterization over {input_bits} input bits exceeds the {limit}-bit limit"
            ),
            Error::MissingCostConstant(kind) => {
                write!(f, "no cost constants configured for cell kind '{kind}'")
            }
            Error::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            Error::Parse { line: Some(line), message } => {
                write!(f, "parse error at line {line}: {message}")
            }
            Error::Parse { line: None, message } => write!(f, "parse error: {message}"),
            Error::Io(err) => write!(f, "io error: {err}"),
            Error::Json(err) => write!(f, "json error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            Error::Json(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Json(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
