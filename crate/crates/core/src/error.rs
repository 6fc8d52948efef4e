use std::path::PathBuf;

/// Errors produced anywhere in the spectral reconstruction pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("degenerate face #{face}: {indices:?}")]
    DegenerateFace { face: usize, indices: [usize; 3] },
    #[error("index {index} out of range for shape with {len} vertices")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("region is empty")]
    EmptyRegion,
    #[error("no face survives submesh extraction")]
    EmptySubmesh,
    #[error("every vertex is on the boundary; no interior remains")]
    AllBoundary,
    #[error("vertex {0} has zero lumped mass")]
    ZeroMass(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("requested {k} eigenpairs of a {n}-dimensional problem")]
    TooManyEigenpairs { k: usize, n: usize },
    #[error("dense oracle refuses dimension {n} (limit {limit})")]
    DenseGuard { n: usize, limit: usize },
    #[error("eigensolver did not converge after {restarts} restarts (worst residual {residual:e})")]
    NoConvergence { restarts: usize, residual: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("spectrum needs at least 2 eigenvalues, got {0}")]
    SpectrumTooShort(usize),
    #[error("encoding layouts differ")]
    LayoutMismatch,
    #[error("unknown segment label `{0}`")]
    UnknownLabel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
