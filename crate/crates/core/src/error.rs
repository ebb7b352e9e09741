use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("malformed NPY file {}: {reason}", path.display())]
    MalformedNpy { path: PathBuf, reason: String },

    #[error("shape mismatch for tensor `{name}`: expected {expected:?}, found {found:?}")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("non-finite value in tensor `{0}`")]
    NonFinite(String),

    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("rate {0} outside (0, 1]")]
    InvalidRate(f64),

    #[error("unknown layer `{0}`")]
    UnknownLayer(String),

    #[error("layer `{0}` cannot be pruned (only conv layers take rate overrides)")]
    NotPrunable(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate sketch: Frobenius norm is zero")]
    DegenerateSketch,

    #[error("shape reconciliation failed: {0}")]
    ShapeReconciliation(String),

    #[error("topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("cannot propagate spatial size: {0}")]
    Spatial(String),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Numerical(_) | Error::DegenerateSketch => ErrorClass::Numerical,
            _ => ErrorClass::Validation,
        }
    }

    /// Stable machine-readable name of the variant.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MissingFile { .. } => "missing_file",
            Error::MalformedNpy { .. } => "malformed_npy",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::InvalidManifest(_) => "invalid_manifest",
            Error::NonFinite(_) => "non_finite",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::InvalidRate(_) => "invalid_rate",
            Error::UnknownLayer(_) => "unknown_layer",
            Error::NotPrunable(_) => "not_prunable",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::Numerical(_) => "numerical_failure",
            Error::DegenerateSketch => "degenerate_sketch",
            Error::ShapeReconciliation(_) => "shape_reconciliation",
            Error::TopologyMismatch(_) => "topology_mismatch",
            Error::Spatial(_) => "spatial_propagation",
        }
    }
}
