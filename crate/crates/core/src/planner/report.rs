use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{QualityReport, FLOPS_CONVENTION};
use crate::tensor::LayerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fd,
    Random,
    Svdtrunc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Input channels of a consumer whose producer shrank.
    Input,
    /// The layer's own filters.
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerAction {
    /// Tensors copied bit-exactly.
    Copy,
    /// At least one axis sketched (or truncated).
    Sketch,
    /// Column subset kept (random comparator or degenerate-sketch fallback).
    Subsample,
}

/// One reduction of one axis of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchRecord {
    pub axis: Axis,
    pub rows: usize,
    pub columns: usize,
    pub width: usize,
    pub shrink_count: usize,
    /// The sketch came out all-zero and a seeded column subset replaced it.
    pub fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub layer: String,
    pub kind: LayerKind,
    pub action: LayerAction,
    pub c: usize,
    pub c_tilde: usize,
    pub in_channels: usize,
    pub in_channels_tilde: usize,
    pub shrink_count: usize,
    /// `‖WWᵀ − ΩΩᵀ‖_F` of the filter-axis reduction (input axis if only that ran).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub covariance_error_frobenius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_epsilon: Option<f64>,
    /// All reductions of this layer meet the spectral certificate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_satisfied: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub sketches: Vec<SketchRecord>,
    /// Kept output-filter indices (subsampling only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selected: Option<Vec<usize>>,
}

impl LayerRecord {
    pub(crate) fn new(layer: &str, kind: LayerKind, action: LayerAction, c: [usize; 2], ci: [usize; 2]) -> Self {
        Self {
            layer: layer.to_string(),
            kind,
            action,
            c: c[0],
            c_tilde: c[1],
            in_channels: ci[0],
            in_channels_tilde: ci[1],
            shrink_count: 0,
            covariance_error_frobenius: None,
            bound_epsilon: None,
            bound_satisfied: None,
            sketches: Vec::new(),
            selected: None,
        }
    }

    /// Fills the summary fields from `sketches`.
    pub(crate) fn summarize(&mut self) {
        self.shrink_count = self.sketches.iter().map(|s| s.shrink_count).sum();
        let main = self
            .sketches
            .iter()
            .find(|s| s.axis == Axis::Output)
            .or_else(|| self.sketches.first())
            .and_then(|s| s.quality.as_ref());
        self.covariance_error_frobenius = main.map(|q| q.gram_err_fro);
        self.bound_epsilon = main.map(|q| q.epsilon_bound);
        let evaluated: Vec<bool> = self.sketches.iter().filter_map(|s| s.quality.as_ref()).map(|q| q.bound_satisfied).collect();
        self.bound_satisfied = (!evaluated.is_empty()).then(|| evaluated.iter().all(|&b| b));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub convention: String,
    pub flops_before: u64,
    pub flops_after: u64,
    pub params_before: u64,
    pub params_after: u64,
    /// Percent removed, one decimal.
    pub pruning_rate_flops: f64,
    pub pruning_rate_params: f64,
    pub layers_sketched: usize,
    pub batchnorm_reset: usize,
    pub fallbacks: usize,
    pub certificates_checked: usize,
    pub certificate_violations: usize,
}

impl Totals {
    pub(crate) fn convention() -> String {
        FLOPS_CONVENTION.to_string()
    }
}

/// Wall-clock measurements, kept apart from the deterministic payload.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub elapsed_total: f64,
    pub layers: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    pub model: String,
    pub method: Method,
    pub global_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub layers: Vec<LayerRecord>,
    pub totals: Totals,
    pub timing: Timing,
}

impl PruneReport {
    /// The report without its `timing` key; identical runs give identical
    /// payloads.
    pub fn payload(&self) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("report serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("timing");
        }
        value
    }

    pub fn certificates_hold(&self) -> bool {
        self.totals.certificate_violations == 0
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish_report(
    base: &crate::tensor::ModelManifest,
    pruned: &crate::tensor::ModelManifest,
    method: Method,
    global_rate: f64,
    seed: Option<u64>,
    layers: Vec<LayerRecord>,
    batchnorm_reset: usize,
    timing: Timing,
) -> crate::error::Result<PruneReport> {
    let comparison = crate::analysis::compare_manifests(base, pruned)?;
    let qualities = layers.iter().flat_map(|l| &l.sketches).filter_map(|s| s.quality.as_ref());
    let (checked, violations) = qualities.fold((0, 0), |(n, v), q| (n + 1, v + usize::from(!q.bound_satisfied)));
    let totals = Totals {
        convention: Totals::convention(),
        flops_before: comparison.base_macs.unwrap_or_default(),
        flops_after: comparison.total_macs,
        params_before: comparison.base_params.unwrap_or_default(),
        params_after: comparison.total_params,
        pruning_rate_flops: comparison.pruning_rate_flops.unwrap_or_default(),
        pruning_rate_params: comparison.pruning_rate_params.unwrap_or_default(),
        layers_sketched: layers.iter().filter(|l| l.action != LayerAction::Copy).count(),
        batchnorm_reset,
        fallbacks: layers.iter().flat_map(|l| &l.sketches).filter(|s| s.fallback).count(),
        certificates_checked: checked,
        certificate_violations: violations,
    };
    Ok(PruneReport { model: base.name.clone(), method, global_rate, seed, layers, totals, timing })
}
