use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not Hermitian (max |A - A^H| = {residue:e})")]
    NotHermitian { residue: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eig:e})")]
    NotPsd { min_eig: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("trace must be positive, got {0:e}")]
    NonPositiveTrace(f64),

    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("state is not normalized (deviation {0:e})")]
    NotNormalized(f64),

    #[error("operation requires a pure state")]
    NotPure,

    #[error("operation requires a bipartite factorization")]
    MissingFactorization,

    #[error("value {value} outside allowed domain: {reason}")]
    OutOfDomain { value: f64, reason: &'static str },

    #[error("Kraus form needs <Theta> >= 0, got {0:e}")]
    NegativeThetaExpectation(f64),

    #[error("steady state is not unique: Liouvillian null space has dimension {0}")]
    DegenerateSteadyState(usize),

    #[error("state health violated at t = {time}: min eigenvalue {min_eig:e}, trace error {trace_err:e}, hermiticity residue {herm_err:e}")]
    StateHealth {
        time: f64,
        min_eig: f64,
        trace_err: f64,
        herm_err: f64,
    },

    #[error("trajectory {index} failed: {source}")]
    Trajectory {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("record too short: {have} time units after transient, need {need}")]
    RecordTooShort { have: f64, need: f64 },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
