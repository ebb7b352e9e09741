//! Per-layer pruning plans and the model-level sketching pipeline, plus the
//! random-subsampling and truncated-SVD comparators.

mod baseline;
mod plan;
mod report;
mod run;

pub use baseline::{random_subsample, random_subsample_with, subsample_columns, svd_truncate};
pub use plan::{build_plan, PrunePlan};
pub use report::{Axis, LayerAction, LayerRecord, Method, PruneReport, SketchRecord, Timing, Totals};
pub use run::{sketch_model, sketch_model_with, SketchOptions};
