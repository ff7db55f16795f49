use std::path::PathBuf;

/// Errors produced anywhere in the framework.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("index out of range: {what} {index} (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("duplicate entry at row {row}, column {col}")]
    DuplicateEntry { row: usize, col: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("duality gap is not available for this problem (conjugate is an indicator)")]
    GapUnsupported,

    #[error("invalid worker count K={k} for n={n}")]
    InvalidK { k: usize, n: usize },
    #[error("aggregation parameter gamma={gamma} outside [1/K, 1] for K={k}")]
    InvalidGamma { gamma: f64, k: usize },
    #[error("block {0} has a singular local Gram matrix on the iteration subspace")]
    SingularBlock(usize),

    #[error("zero curvature at coordinate {0} with a non-stationary gradient")]
    ZeroCurvature(usize),
    #[error("reference oracle did not converge after {iters} iterations (residual {residual:e})")]
    OracleNotConverged { iters: usize, residual: f64 },

    #[error("iterate history not retained (needed for {0})")]
    HistoryMissing(&'static str),
    #[error("reference solution required for {0}")]
    ReferenceMissing(&'static str),

    #[error("transport initialisation failed: {0}")]
    TransportInitFailure(String),
    #[error("round mismatch: {0}")]
    RoundMismatch(String),
    #[error("worker {0} lost: {1}")]
    WorkerLost(usize, String),
    #[error("worker {0} panicked: {1}")]
    WorkerPanic(usize, String),

    #[error("parse error at line {line}, token {token}: {msg}")]
    ParseError {
        line: usize,
        token: usize,
        msg: String,
    },
    #[error("empty data file {0}")]
    EmptyFile(PathBuf),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("insufficient data for rate fit: {usable} usable rows (need {needed})")]
    InsufficientData { usable: usize, needed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
