use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{LayerKind, LayerSpec, ModelManifest, TensorArchive};

pub const FLOPS_CONVENTION: &str =
    "1 FLOP = 1 multiply-accumulate; conv/fc weights only (bias, BN, pooling excluded); params = weights + biases + 2 per BN channel";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerComplexity {
    pub layer: String,
    pub kind: LayerKind,
    pub macs: u64,
    pub params: u64,
    pub output_spatial: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub model: String,
    pub convention: String,
    pub input_spatial: [usize; 2],
    pub layers: Vec<LayerComplexity>,
    pub total_macs: u64,
    pub total_params: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_macs: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub base_params: Option<u64>,
    /// Percent of FLOPs removed relative to the base model, one decimal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pruning_rate_flops: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pruning_rate_params: Option<f64>,
}

fn out_size(layer: &LayerSpec, size: usize, kernel: usize) -> Result<usize> {
    let padded = size + 2 * layer.padding;
    if padded < kernel || layer.stride == 0 {
        return Err(Error::Spatial(format!("layer `{}`: input {size} with kernel {kernel} and padding {}", layer.name, layer.padding)));
    }
    Ok((padded - kernel) / layer.stride + 1)
}

fn layer_cost(layer: &LayerSpec, input: [usize; 2]) -> Result<(u64, u64, [usize; 2])> {
    let bias = |c: usize| if layer.bias { c as u64 } else { 0 };
    Ok(match layer.kind {
        LayerKind::Conv | LayerKind::Pool => {
            let out = if layer.global {
                [1, 1]
            } else {
                [out_size(layer, input[0], layer.kernel_h)?, out_size(layer, input[1], layer.kernel_w)?]
            };
            if layer.kind == LayerKind::Pool {
                (0, 0, out)
            } else {
                let weights = (layer.out_channels * layer.in_channels * layer.kernel_h * layer.kernel_w) as u64;
                (weights * (out[0] * out[1]) as u64, weights + bias(layer.out_channels), out)
            }
        }
        LayerKind::Fc => {
            let weights = (layer.out_channels * layer.in_channels) as u64;
            (weights, weights + bias(layer.out_channels), [1, 1])
        }
        LayerKind::Bn => (0, 2 * layer.out_channels as u64, input),
        LayerKind::Add | LayerKind::Concat => (0, 0, input),
    })
}

/// Per-layer MACs and parameters with spatial sizes propagated along the DAG.
pub fn count_flops_params(manifest: &ModelManifest) -> Result<ComplexityReport> {
    let producers = manifest.producers();
    let order = manifest.topological_order()?;
    let mut spatial: Vec<Option<[usize; 2]>> = vec![None; manifest.layers.len()];
    let mut costs = vec![(0u64, 0u64); manifest.layers.len()];
    for &i in &order {
        let layer = &manifest.layers[i];
        let mut input = None;
        for &p in &producers[i] {
            let s = spatial[p].expect("producers precede consumers");
            match input {
                None => input = Some(s),
                Some(prev) if prev != s => {
                    return Err(Error::Spatial(format!("layer `{}` joins inputs of size {prev:?} and {s:?}", layer.name)));
                }
                _ => {}
            }
        }
        let (macs, params, out) = layer_cost(layer, input.unwrap_or(manifest.input_spatial))?;
        spatial[i] = Some(out);
        costs[i] = (macs, params);
    }
    let layers: Vec<LayerComplexity> = manifest
        .layers
        .iter()
        .enumerate()
        .map(|(i, l)| LayerComplexity {
            layer: l.name.clone(),
            kind: l.kind,
            macs: costs[i].0,
            params: costs[i].1,
            output_spatial: spatial[i].unwrap_or([0, 0]),
        })
        .collect();
    Ok(ComplexityReport {
        model: manifest.name.clone(),
        convention: FLOPS_CONVENTION.to_string(),
        input_spatial: manifest.input_spatial,
        total_macs: layers.iter().map(|l| l.macs).sum(),
        total_params: layers.iter().map(|l| l.params).sum(),
        layers,
        base_macs: None,
        base_params: None,
        pruning_rate_flops: None,
        pruning_rate_params: None,
    })
}

fn percent_removed(before: u64, after: u64) -> f64 {
    if before == 0 {
        return 0.0;
    }
    let rate = 100.0 * (1.0 - after as f64 / before as f64);
    (rate * 10.0).round() / 10.0 + 0.0
}

/// Complexity of `pruned` with pruning rates relative to `base`.
pub fn compare_models(base: &TensorArchive, pruned: &TensorArchive) -> Result<ComplexityReport> {
    compare_manifests(&base.manifest, &pruned.manifest)
}

pub fn compare_manifests(base: &ModelManifest, pruned: &ModelManifest) -> Result<ComplexityReport> {
    let same_layers = base.layers.len() == pruned.layers.len()
        && base.layers.iter().zip(&pruned.layers).all(|(a, b)| a.name == b.name && a.kind == b.kind);
    if !same_layers || base.edges != pruned.edges || base.input_spatial != pruned.input_spatial {
        return Err(Error::TopologyMismatch(format!("`{}` and `{}` differ in layers or edges", base.name, pruned.name)));
    }
    let before = count_flops_params(base)?;
    let mut report = count_flops_params(pruned)?;
    report.pruning_rate_flops = Some(percent_removed(before.total_macs, report.total_macs));
    report.pruning_rate_params = Some(percent_removed(before.total_params, report.total_params));
    report.base_macs = Some(before.total_macs);
    report.base_params = Some(before.total_params);
    Ok(report)
}
