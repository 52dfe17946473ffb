use std::path::PathBuf;

/// Errors raised anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum IdfdError {
    #[error("row {row} has norm {norm:e}, too small to normalize")]
    ZeroRow { row: usize, norm: f64 },
    #[error("matrix is not symmetric: |a[{i}][{j}] - a[{j}][{i}]| = {diff:e}")]
    NotSymmetric { i: usize, j: usize, diff: f64 },
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {off:e})")]
    ConvergenceFailure { sweeps: usize, off: f64 },
    #[error("index {index} out of range for size {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("feature column {column} is all zero")]
    DegenerateFeature { column: usize },
    #[error("argument outside domain: {0}")]
    DomainError(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{k} clusters do not divide {n} points")]
    DivisibilityError { n: usize, k: usize },
    #[error("cannot place {k} directions in dimension {dim} with angular separation {separation}")]
    InfeasibleSeparation { k: usize, dim: usize, separation: f64 },
    #[error("bad magic bytes in {0}")]
    BadMagic(PathBuf),
    #[error("truncated file {path}: expected {expected} bytes, found {found}")]
    TruncatedFile { path: PathBuf, expected: usize, found: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, IdfdError>;
