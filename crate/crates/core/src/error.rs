use thiserror::Error;

/// Errors raised by the simulation, channel and characterization routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("channel acts on {channel} qubits but {targets} targets were given")]
    ArityMismatch { channel: usize, targets: usize },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitOutOfRange { index: usize, n_qubits: usize },

    #[error("process matrix is not completely positive (min eigenvalue {min_eigenvalue:.3e})")]
    NotCompletelyPositive { min_eigenvalue: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("Kraus operators are not trace preserving (residual {residual:.3e})")]
    NotTracePreserving { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported channel kind: {0}")]
    UnsupportedKind(String),

    #[error("correlation is undefined for a constant vector")]
    UndefinedCorrelation,

    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("line {line}: value {value} outside [-1, 1]")]
    ValueOutOfRange { line: usize, value: f64 },

    #[error("line {line}: duplicate row for qubit {qubit}, setting {setting}, basis {basis}")]
    DuplicateRow {
        line: usize,
        qubit: usize,
        setting: usize,
        basis: char,
    },

    #[error("expectation table is incomplete, missing: {}", .0.join(", "))]
    MissingRows(Vec<String>),

    #[error("tables disagree: {0}")]
    InconsistentTables(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
