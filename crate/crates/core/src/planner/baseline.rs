use std::collections::BTreeMap;
use std::time::Instant;

use super::plan::{is_padding_pool, PrunePlan};
use super::report::{finish_report, Axis, LayerAction, LayerRecord, Method, PruneReport, SketchRecord, Timing};
use crate::analysis::sketch_quality;
use crate::error::{Error, Result};
use crate::linalg::{fix_sign, symmetric_eigen};
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::testkit::{stream_seed, CounterRng};
use crate::tensor::{filter_matrix, LayerKind, TensorArchive, TensorRole, WeightTensor};

/// `U_k·diag(S_k)` for the top `k` singular triplets of `w`: the best
/// width-`k` factor of `WWᵀ`. Each column's largest-magnitude entry is
/// positive.
pub fn svd_truncate<T: Scalar>(w: &Matrix<T>, k: usize) -> Result<Matrix<T>> {
    let (d, c) = w.shape();
    if k > d.min(c) {
        return Err(Error::DimensionMismatch(format!("cannot keep {k} singular triplets of a {d}×{c} matrix")));
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("svd_truncate input".into()));
    }
    let mut out = Matrix::zeros(d, k);
    if c <= d {
        let eig = symmetric_eigen(&w.gram_cols())?;
        let v = Matrix::from_fn(c, k, |i, j| eig.vectors[(i, j)]);
        out = w.matmul(&v);
        for j in 0..k {
            fix_sign(out.col_mut(j));
        }
    } else {
        let eig = symmetric_eigen(&w.gram_rows())?;
        for j in 0..k {
            let s = eig.values[j].max(T::zero()).sqrt();
            let col = out.col_mut(j);
            col.copy_from_slice(eig.vectors.col(j));
            fix_sign(col);
            col.iter_mut().for_each(|x| *x *= s);
        }
    }
    Ok(out)
}

/// [`svd_truncate`] at model scale: keeps `min(k, d, c)` triplets and pads
/// with zero columns up to `k`.
pub(crate) fn svd_truncate_padded(w: &Matrix<f64>, k: usize) -> Result<Matrix<f64>> {
    let kept = svd_truncate(w, k.min(w.rows()).min(w.cols()))?;
    Ok(kept.hstack(&Matrix::zeros(w.rows(), k - kept.cols())))
}

/// Uniformly random order-preserving subset of `k` columns.
pub fn subsample_columns<T: Scalar>(w: &Matrix<T>, k: usize, seed: u64) -> (Matrix<T>, Vec<usize>) {
    let idx = CounterRng::new(seed).subset(w.cols(), k);
    (w.select_cols(&idx), idx)
}

/// Slices a `[c, ci, …]` tensor to `rows × cols` index sets.
fn slice_weight(t: &WeightTensor, out: &[usize], inp: &[usize]) -> Result<WeightTensor> {
    let [_, ci, h, w] = t.as_4d()?;
    let hw = h * w;
    let mut data = Vec::with_capacity(out.len() * inp.len() * hw);
    for &f in out {
        for &k in inp {
            data.extend_from_slice(&t.data[(f * ci + k) * hw..(f * ci + k + 1) * hw]);
        }
    }
    let mut shape = t.shape.clone();
    shape[0] = out.len();
    shape[1] = inp.len();
    WeightTensor::new(t.name.clone(), shape, data)
}

fn slice_vector(t: &WeightTensor, idx: &[usize]) -> Result<WeightTensor> {
    WeightTensor::new(t.name.clone(), vec![idx.len()], idx.iter().map(|&i| t.data[i]).collect())
}

/// Random-subset comparator: each layer (or prune group) keeps a seeded,
/// order-preserving subset of its filters; consumers keep the matching
/// input slices and batch-norm parameters are sliced alongside.
pub fn random_subsample(archive: &TensorArchive, plan: &PrunePlan, seed: u64) -> Result<(TensorArchive, PruneReport)> {
    random_subsample_with(archive, plan, seed, true)
}

/// [`random_subsample`] with quality evaluation optional.
pub fn random_subsample_with(archive: &TensorArchive, plan: &PrunePlan, seed: u64, evaluate: bool) -> Result<(TensorArchive, PruneReport)> {
    let start = Instant::now();
    archive.validate()?;
    let manifest = &archive.manifest;
    let pruned = plan.pruned_manifest(manifest)?;
    let producers = manifest.producers();

    let mut draws: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut selection: Vec<Vec<usize>> = vec![Vec::new(); manifest.layers.len()];
    let mut tensors = Vec::new();
    let mut records = BTreeMap::new();
    let mut timing = Timing::default();
    for i in manifest.topological_order()? {
        let layer = &manifest.layers[i];
        let target = &pruned.layers[i];
        let ps = &producers[i];
        let incoming: Vec<usize> = match layer.kind {
            _ if ps.is_empty() => (0..layer.in_channels).collect(),
            LayerKind::Concat => {
                let mut offset = 0;
                let mut joined = Vec::new();
                for &p in ps {
                    joined.extend(selection[p].iter().map(|&k| k + offset));
                    offset += manifest.layers[p].out_channels;
                }
                joined
            }
            LayerKind::Add => {
                let lead = ps.iter().copied().find(|&p| !is_padding_pool(&manifest.layers[p])).unwrap_or(ps[0]);
                selection[lead].clone()
            }
            _ => selection[ps[0]].clone(),
        };
        selection[i] = match layer.kind {
            LayerKind::Conv | LayerKind::Fc => {
                let layer_start = Instant::now();
                let c = layer.out_channels;
                let keep = target.out_channels;
                let out: Vec<usize> = if keep == c {
                    (0..c).collect()
                } else {
                    let key = layer.prune_group.as_ref().map_or_else(|| format!("layer:{}", layer.name), |g| format!("group:{g}"));
                    draws.entry(key.clone()).or_insert_with(|| CounterRng::new(stream_seed(seed, &key)).subset(c, keep)).clone()
                };
                let weight = archive.weight(&layer.name).ok_or_else(|| Error::UnknownLayer(layer.name.clone()))?;
                let ci = layer.in_channels;
                let changed = keep != c || incoming.len() != ci;
                let action = if changed { LayerAction::Subsample } else { LayerAction::Copy };
                let mut record = LayerRecord::new(&layer.name, layer.kind, action, [c, keep], [ci, incoming.len()]);
                if changed {
                    let all: Vec<usize> = (0..c).collect();
                    let input_sliced = slice_weight(weight, &all, &incoming)?;
                    if keep != c {
                        let full = filter_matrix::<f64>(&input_sliced)?;
                        let quality = if evaluate { Some(sketch_quality(&full, &full.select_cols(&out), keep)?) } else { None };
                        record.sketches.push(SketchRecord {
                            axis: Axis::Output,
                            rows: full.rows(),
                            columns: c,
                            width: keep,
                            shrink_count: 0,
                            fallback: false,
                            quality,
                        });
                        record.selected = Some(out.clone());
                    }
                    record.summarize();
                    tensors.push(slice_weight(&input_sliced, &out, &(0..incoming.len()).collect::<Vec<_>>())?);
                    if let Some(b) = archive.tensor(&layer.name, TensorRole::Bias) {
                        tensors.push(slice_vector(b, &out)?);
                    }
                } else {
                    tensors.extend(super::run::copy_tensors(archive, layer));
                }
                timing.layers.insert(layer.name.clone(), layer_start.elapsed().as_secs_f64());
                records.insert(i, record);
                out
            }
            LayerKind::Bn => {
                for (role, _) in TensorRole::expected(layer) {
                    let t = archive.tensor(&layer.name, role).ok_or_else(|| Error::UnknownLayer(layer.name.clone()))?;
                    tensors.push(slice_vector(t, &incoming)?);
                }
                incoming
            }
            LayerKind::Pool => {
                let pad = target.out_channels - target.in_channels;
                let mut out = incoming;
                out.extend(layer.in_channels..layer.in_channels + pad);
                out
            }
            LayerKind::Add | LayerKind::Concat => incoming,
        };
    }
    let output = TensorArchive::new(pruned, tensors).map_err(|e| Error::ShapeReconciliation(e.to_string()))?;
    timing.elapsed_total = start.elapsed().as_secs_f64();
    let records = records.into_values().collect();
    let report = finish_report(manifest, &output.manifest, Method::Random, plan.global_rate, Some(seed), records, 0, timing)?;
    Ok((output, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_rank_truncation_is_exact() {
        let w = Matrix::<f64>::from_diagonal(3, 3, &[3.0, 2.0, 1.0]);
        let o = svd_truncate(&w, 3).unwrap();
        assert!(w.gram_rows().sub(&o.gram_rows()).max_abs() < 1e-12);
    }

    #[test]
    fn rank_one_truncation() {
        let w = Matrix::<f64>::from_diagonal(3, 3, &[3.0, 2.0, 1.0]);
        let o = svd_truncate(&w, 1).unwrap();
        assert!((o[(0, 0)] - 3.0).abs() < 1e-12 && o[(1, 0)] == 0.0 && o[(2, 0)] == 0.0);
        let q = sketch_quality(&w, &o, 1).unwrap();
        assert!((q.gram_err_spec - 4.0).abs() < 1e-12);
    }

    #[test]
    fn wide_truncation_matches_tall() {
        let w = Matrix::from_fn(3, 7, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let a = svd_truncate(&w, 2).unwrap();
        let b = svd_truncate(&w.transpose().transpose(), 2).unwrap();
        assert_eq!(a, b);
        let tall = Matrix::from_fn(7, 3, |i, j| w[(j, i)]);
        // same singular values either way
        let sa: Vec<f64> = (0..2).map(|j| a.col(j).iter().map(|x| x * x).sum::<f64>()).collect();
        let sb: Vec<f64> = (0..2).map(|j| svd_truncate(&tall, 2).unwrap().col(j).iter().map(|x| x * x).sum::<f64>()).collect();
        for (x, y) in sa.iter().zip(&sb) {
            assert!((x - y).abs() < 1e-10 * x);
        }
    }

    #[test]
    fn too_many_triplets() {
        let w = Matrix::<f64>::zeros(2, 5);
        assert!(matches!(svd_truncate(&w, 3), Err(Error::DimensionMismatch(_))));
        assert_eq!(svd_truncate_padded(&w, 3).unwrap().shape(), (2, 3));
    }

    #[test]
    fn subsample_keeps_exact_columns() {
        let w = Matrix::from_fn(4, 10, |i, j| (i * 10 + j) as f64);
        let (s, idx) = subsample_columns(&w, 4, 3);
        for (k, &j) in idx.iter().enumerate() {
            assert_eq!(s.col(k), w.col(j));
        }
    }
}
