use crate::pauli::PauliString;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{kind} parse error at line {line}: {msg}")]
    Parse {
        kind: &'static str,
        line: usize,
        msg: String,
    },
    #[error("qubit count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("invalid electron count: {n_electrons} electrons for {n_qubits} qubits ({msg})")]
    InvalidElectronCount {
        n_electrons: usize,
        n_qubits: usize,
        msg: &'static str,
    },
    #[error("token {token} out of range 1..={limit}")]
    TokenOutOfRange { token: usize, limit: usize },
    #[error("position {length} exceeds model capacity {max_positions}")]
    LengthOverflow { length: usize, max_positions: usize },
    #[error("Pauli string {0} not present in expectation cache")]
    MissingPauli(PauliString),
    #[error("{n_qubits} qubits too large for {method} ground-energy solve (limit {limit})")]
    DimensionTooLarge {
        n_qubits: usize,
        method: &'static str,
        limit: usize,
    },
    #[error("eigensolver did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
