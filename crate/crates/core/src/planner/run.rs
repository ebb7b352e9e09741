use std::time::Instant;

use log::warn;
use rayon::prelude::*;

use super::baseline::{subsample_columns, svd_truncate_padded};
use super::plan::PrunePlan;
use super::report::{finish_report, Axis, LayerAction, LayerRecord, Method, PruneReport, SketchRecord, Timing};
use crate::analysis::sketch_quality;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::sketch::fd_sketch;
use crate::testkit::stream_seed;
use crate::tensor::{channel_matrix, filter_matrix, LayerKind, LayerSpec, TensorArchive, TensorRole, WeightTensor};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SketchOptions {
    /// [`Method::Fd`] or [`Method::Svdtrunc`]; the random comparator lives in
    /// [`super::random_subsample`].
    pub method: Method,
    /// Compute a [`crate::analysis::QualityReport`] for every reduction.
    pub evaluate: bool,
}

impl Default for SketchOptions {
    fn default() -> Self {
        Self { method: Method::Fd, evaluate: true }
    }
}

pub(crate) struct LayerOutcome {
    pub tensors: Vec<WeightTensor>,
    pub record: LayerRecord,
    pub modified: bool,
    pub elapsed: f64,
}

/// Sketches every layer whose width changes under `plan`, with quality
/// certificates.
pub fn sketch_model(archive: &TensorArchive, plan: &PrunePlan) -> Result<(TensorArchive, PruneReport)> {
    sketch_model_with(archive, plan, &SketchOptions::default())
}

pub fn sketch_model_with(archive: &TensorArchive, plan: &PrunePlan, options: &SketchOptions) -> Result<(TensorArchive, PruneReport)> {
    if options.method == Method::Random {
        return Err(Error::InvalidManifest("random subsampling is not a sketching method; use random_subsample".into()));
    }
    let start = Instant::now();
    archive.validate()?;
    let manifest = &archive.manifest;
    let pruned = plan.pruned_manifest(manifest)?;

    // widths are fixed by the plan, so layers are independent
    let weighted: Vec<usize> = (0..manifest.layers.len()).filter(|&i| manifest.layers[i].kind.is_weighted()).collect();
    let outcomes: Vec<LayerOutcome> = weighted
        .par_iter()
        .map(|&i| reduce_layer(archive, &manifest.layers[i], &pruned.layers[i], options))
        .collect::<Result<_>>()?;

    let mut modified = vec![false; manifest.layers.len()];
    for (&i, o) in weighted.iter().zip(&outcomes) {
        modified[i] = o.modified;
    }
    let producers = manifest.producers();
    let mut bn_reset = 0;
    let mut tensors = Vec::new();
    let mut timing = Timing::default();
    let mut records = Vec::new();
    let mut by_layer = weighted.iter().copied().zip(outcomes).collect::<std::collections::BTreeMap<_, _>>();
    for i in manifest.topological_order()? {
        let layer = &manifest.layers[i];
        if !layer.kind.is_weighted() {
            modified[i] = producers[i].iter().any(|&p| modified[p]);
        }
        if layer.kind == LayerKind::Bn {
            if modified[i] {
                bn_reset += 1;
                tensors.extend(reset_batchnorm(&pruned.layers[i]));
            } else {
                tensors.extend(copy_tensors(archive, layer));
            }
        }
    }
    for i in weighted {
        let o = by_layer.remove(&i).expect("one outcome per weighted layer");
        timing.layers.insert(o.record.layer.clone(), o.elapsed);
        tensors.extend(o.tensors);
        records.push(o.record);
    }
    let output = TensorArchive::new(pruned, tensors).map_err(|e| Error::ShapeReconciliation(e.to_string()))?;
    timing.elapsed_total = start.elapsed().as_secs_f64();
    let report = finish_report(manifest, &output.manifest, options.method, plan.global_rate, None, records, bn_reset, timing)?;
    Ok((output, report))
}

pub(crate) fn copy_tensors(archive: &TensorArchive, layer: &LayerSpec) -> Vec<WeightTensor> {
    TensorRole::expected(layer)
        .into_iter()
        .filter_map(|(role, _)| archive.tensor(&layer.name, role).cloned())
        .collect()
}

fn reset_batchnorm(layer: &LayerSpec) -> Vec<WeightTensor> {
    let c = layer.out_channels;
    [(TensorRole::Weight, 1.0), (TensorRole::Bias, 0.0), (TensorRole::RunningMean, 0.0), (TensorRole::RunningVar, 1.0)]
        .into_iter()
        .map(|(role, v)| WeightTensor::filled(role.tensor_name(&layer.name), vec![c], v))
        .collect()
}

/// Filter matrix `(k·hw) × c` from an input-axis sketch `(c·hw) × k`.
fn channel_to_filters(omega: &Matrix<f64>, c: usize, hw: usize) -> Matrix<f64> {
    let k = omega.cols();
    let mut out = Matrix::zeros(k * hw, c);
    for f in 0..c {
        let col = out.col_mut(f);
        for kk in 0..k {
            let src = &omega.col(kk)[f * hw..(f + 1) * hw];
            col[kk * hw..(kk + 1) * hw].copy_from_slice(src);
        }
    }
    out
}

fn reduce_layer(archive: &TensorArchive, old: &LayerSpec, new: &LayerSpec, options: &SketchOptions) -> Result<LayerOutcome> {
    let start = Instant::now();
    let weight = archive.weight(&old.name).ok_or_else(|| Error::UnknownLayer(old.name.clone()))?;
    let [c, ci, h, w] = weight.as_4d()?;
    let (new_c, new_ci) = (new.out_channels, new.in_channels);
    if new_c == c && new_ci == ci {
        return Ok(LayerOutcome {
            tensors: copy_tensors(archive, old),
            record: LayerRecord::new(&old.name, old.kind, LayerAction::Copy, [c, c], [ci, ci]),
            modified: false,
            elapsed: start.elapsed().as_secs_f64(),
        });
    }
    let hw = h * w;
    let mut record = LayerRecord::new(&old.name, old.kind, LayerAction::Sketch, [c, new_c], [ci, new_ci]);
    let mut filters = if new_ci != ci {
        let channels = channel_matrix::<f64>(weight)?;
        let (omega, rec) = reduce_matrix(&channels, new_ci, Axis::Input, &old.name, options)?;
        record.sketches.push(rec);
        channel_to_filters(&omega, c, hw)
    } else {
        filter_matrix::<f64>(weight)?
    };
    if new_c != c {
        let (omega, rec) = reduce_matrix(&filters, new_c, Axis::Output, &old.name, options)?;
        record.sketches.push(rec);
        filters = omega;
    }
    let norm = filters.frobenius_norm();
    if norm > 0.0 {
        filters = filters.scaled(1.0 / norm);
    }
    if record.sketches.iter().any(|s| s.fallback) {
        record.action = LayerAction::Subsample;
    }
    record.summarize();

    let shape = if weight.shape.len() == 2 { vec![new_c, new_ci] } else { vec![new_c, new_ci, h, w] };
    let data = filters.as_slice().iter().map(|&x| x as f32).collect();
    let mut tensors = vec![WeightTensor::new(TensorRole::Weight.tensor_name(&old.name), shape, data)?];
    if let Some(bias) = archive.tensor(&old.name, TensorRole::Bias) {
        // sketched filters are fresh combinations with no matching bias
        tensors.push(if new_c == c { bias.clone() } else { WeightTensor::filled(bias.name.clone(), vec![new_c], 0.0) });
    }
    Ok(LayerOutcome { tensors, record, modified: true, elapsed: start.elapsed().as_secs_f64() })
}

fn reduce_matrix(m: &Matrix<f64>, width: usize, axis: Axis, layer: &str, options: &SketchOptions) -> Result<(Matrix<f64>, SketchRecord)> {
    let (omega, shrink_count, fallback) = match options.method {
        Method::Svdtrunc => (svd_truncate_padded(m, width)?, 0, false),
        _ => {
            let result = fd_sketch(m, width)?;
            if result.omega.is_zero() && !m.is_zero() {
                let label = format!("{layer}/{axis:?}");
                warn!("sketch of `{layer}` ({axis:?} axis) vanished; keeping a seeded random column subset");
                let (subset, _) = subsample_columns(m, width, stream_seed(0, &label));
                (subset, result.shrink_count, true)
            } else {
                (result.omega, result.shrink_count, false)
            }
        }
    };
    let quality = if options.evaluate { Some(sketch_quality(m, &omega, width)?) } else { None };
    let record = SketchRecord { axis, rows: m.rows(), columns: m.cols(), width, shrink_count, fallback, quality };
    Ok((omega, record))
}
