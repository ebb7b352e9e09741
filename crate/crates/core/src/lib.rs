//! Structured pruning of convolutional filter banks by Frequent Directions
//! sketching.
//!
//! Every layer's filters are viewed as a `d × c` matrix (one flattened filter
//! per column). Sketching that matrix down to `c̃` columns keeps the filter
//! Gram matrix `WWᵀ` within a provable spectral error, and the sketched
//! columns become the warm-start weights of the slimmer layer.
//!
//! The numerical core is generic over [`Scalar`] (`f32`/`f64`); the aliases
//! below fix the `f64` working precision used by the pipeline.

pub mod analysis;
pub mod arch;
pub mod error;
pub mod linalg;
pub mod matrix;
pub mod planner;
pub mod scalar;
pub mod sketch;
pub mod tensor;
pub mod testkit;

pub use error::{Error, ErrorClass, Result};
pub use matrix::Matrix;
pub use scalar::Scalar;

/// Filter matrix in working precision; columns are flattened filters.
pub type FilterMatrix = Matrix<f64>;
pub type SketchResult = sketch::SketchResult<f64>;
pub type SvdShrinkState = sketch::SvdShrinkState<f64>;
pub type QualityReport = analysis::QualityReport;
