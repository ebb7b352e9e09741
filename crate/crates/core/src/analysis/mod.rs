//! Covariance-preservation diagnostics, weight statistics and complexity
//! accounting.

mod complexity;
mod quality;
mod stats;

pub use complexity::{compare_manifests, compare_models, count_flops_params, ComplexityReport, LayerComplexity, FLOPS_CONVENTION};
pub use quality::{gram_difference_spectrum, sketch_quality, GramSpectrum, QualityReport, CERTIFICATE_SLACK};
pub use stats::{tensor_stats, weight_stats, LayerStats, WeightStats, HISTOGRAM_BINS};

#[allow(unused_imports)]
pub(crate) use quality::sketch_quality_with_limit;
