use thiserror::Error;

use crate::lattice::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no such cell: {0}")]
    NoSuchCell(u64),

    #[error("invalid lattice: {0}")]
    InvalidLattice(ValidationReport),

    #[error("invalid exponents: {0}")]
    InvalidExponents(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid mass {mass} on leaf {leaf}: masses must be finite and nonnegative")]
    InvalidMass { leaf: u64, mass: f64 },

    #[error("invalid coefficient {value} on cell {cell}: coefficients must be finite and nonnegative")]
    InvalidCoefficient { cell: u64, value: f64 },

    #[error("function has {got} values but the lattice has {expected} leaves")]
    LengthMismatch { expected: usize, got: usize },

    #[error("non-finite intermediate ({what}) at cell {cell}")]
    NonFinite { cell: u64, what: &'static str },

    #[error("reduction requires nonnegative input (leaf {leaf} has {value})")]
    NegativeInput { leaf: u64, value: f64 },

    #[error("C₂ undefined for p ≤ q (p = {p}, q = {q})")]
    C2Undefined { p: f64, q: f64 },

    #[error("{0}")]
    ExponentMismatch(String),

    #[error("depth {depth} exceeds the materialization limit {limit}; use the closed-form evaluators")]
    TooDeep { depth: usize, limit: usize },

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
}
