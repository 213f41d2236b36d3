use thiserror::Error;

/// Errors raised by the recovery library and its harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("the orthogonal complement of the full space is empty")]
    EmptyComplement,

    /// `index` is 1-based, pointing at the first vector that lies in the span
    /// of its predecessors.
    #[error("vector {index} is linearly dependent on the preceding vectors")]
    LinearDependence { index: usize },

    #[error("frame is not orthonormal (Gram deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("abscissae are not equispaced (sample {index} is off by {offset:e})")]
    Spacing { index: usize, offset: f64 },

    #[error("need at least {needed} samples, got {got}")]
    Arity { needed: usize, got: usize },

    #[error("unsupported polynomial degree {0} (supported: 1, 3)")]
    UnsupportedDegree(usize),

    #[error("direction is not a unit vector (norm {0})")]
    NotUnit(f64),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no candidate projection is consistent with the measurements")]
    Inconsistent,

    #[error("{} distinct projections are consistent with the measurements", candidates.len())]
    Ambiguous {
        candidates: Vec<nalgebra::DMatrix<f64>>,
    },

    #[error("sign enumeration exceeded the cap of {0} candidates")]
    EnumerationCap(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unknown profile '{0}' (known: identity, tanh, sin5)")]
    UnknownProfile(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid config: {0}")]
    ConfigValue(String),

    #[error("csv parse error at line {line}: {msg}")]
    Csv { line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
