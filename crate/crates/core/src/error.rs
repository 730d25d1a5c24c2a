use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what}: {requested} qubits requested, at most {max} supported")]
    Capacity {
        what: &'static str,
        requested: usize,
        max: usize,
    },

    #[error("{what} out of range: {value} (allowed {allowed})")]
    OutOfRange {
        what: &'static str,
        value: i64,
        allowed: String,
    },

    #[error("width mismatch: expected {expected} bits, got {found}")]
    WidthMismatch { expected: usize, found: usize },

    #[error("invalid bit string {0:?}: only '0' and '1' are allowed")]
    InvalidBitString(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error(
        "infeasible phase plan at register width {width}: (E - 2^(w-1) F)^2 = {lhs:.6e} exceeds a_t^2 = {rhs:.6e} (E = {e:.6}, F = {f:.6}, a_t = {a_t:.6})"
    )]
    Infeasible {
        width: usize,
        e: f64,
        f: f64,
        a_t: f64,
        lhs: f64,
        rhs: f64,
    },

    #[error("numeric domain error: {what} = {value}")]
    NumericDomain { what: &'static str, value: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("worker process failed: {0}")]
    Worker(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
