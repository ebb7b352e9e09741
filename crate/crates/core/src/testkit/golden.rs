use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::reference::reference_fd;
use super::rng::{stream_seed, CounterRng};
use crate::analysis::sketch_quality;
use crate::error::Result;
use crate::matrix::Matrix;
use crate::scalar::Scalar;
use crate::tensor::{LayerKind, LayerSpec, ModelManifest, TensorArchive, TensorRole, WeightTensor};

pub const GOLDEN_FORMAT: &str = "sketchprune-golden-v1";

/// One oracle-backed case. `W` is regenerated from `seed` with
/// [`gaussian_matrix`]; the expected sketch is pinned by checksum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCase {
    pub seed: u64,
    pub d: usize,
    pub c: usize,
    pub ell: usize,
    pub input_checksum: String,
    pub omega_checksum: String,
    pub gram_err_spec: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenFile {
    pub format: String,
    pub cases: Vec<GoldenCase>,
}

impl GoldenFile {
    /// The committed sweep.
    pub fn committed() -> Self {
        serde_json::from_str(include_str!("../../data/golden_cases.json")).expect("committed golden file parses")
    }
}

/// `d × c` standard-normal matrix filled column by column from one stream.
pub fn gaussian_matrix(seed: u64, d: usize, c: usize) -> Matrix<f64> {
    let mut rng = CounterRng::new(seed);
    let data = (0..d * c).map(|_| rng.standard_normal()).collect();
    Matrix::from_col_major(d, c, data)
}

/// SHA-256 (hex) of `rows` and `cols` as little-endian `u64` followed by the
/// entries as little-endian `f64` in column-major order.
pub fn checksum<T: Scalar>(m: &Matrix<T>) -> String {
    let mut bytes = Vec::with_capacity(16 + m.as_slice().len() * 8);
    bytes.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for &x in m.as_slice() {
        bytes.extend_from_slice(&x.as_f64().to_le_bytes());
    }
    hex::encode(Sha256::digest(&bytes))
}

/// Single 1×1 conv layer whose filter matrix is `w` (rounded to `f32`).
pub fn case_archive(w: &Matrix<f64>, name: &str) -> TensorArchive {
    let (d, c) = w.shape();
    let mut manifest = ModelManifest::new(name, [1, 1], c);
    manifest.layers.push(LayerSpec::conv("conv", d, c, 1));
    let data = (0..c).flat_map(|j| w.col(j).iter().map(|&x| x as f32).collect::<Vec<_>>()).collect();
    let weight = WeightTensor::new("conv.weight", vec![c, d, 1, 1], data).expect("shape matches");
    TensorArchive::new(manifest, [weight]).expect("single conv archive is valid")
}

pub fn generate_case(seed: u64, d: usize, c: usize, ell: usize) -> Result<(GoldenCase, TensorArchive)> {
    let w = gaussian_matrix(seed, d, c);
    let omega = reference_fd(&w, ell)?;
    let quality = sketch_quality(&w, &omega, ell)?;
    let case = GoldenCase {
        seed,
        d,
        c,
        ell,
        input_checksum: checksum(&w),
        omega_checksum: checksum(&omega),
        gram_err_spec: quality.gram_err_spec,
    };
    Ok((case, case_archive(&w, &format!("golden-{seed}"))))
}

/// `(seed, d, c, ℓ)` for the standard sweep: `d ∈ 8..=512`, `c ∈ 4..=256`,
/// `ℓ ∈ 2..=c`, each uniform, drawn from stream `base_seed`.
pub fn sweep_parameters(base_seed: u64, count: usize) -> Vec<(u64, usize, usize, usize)> {
    let mut rng = CounterRng::new(base_seed);
    (0..count)
        .map(|i| {
            let d = 8 + rng.below(505) as usize;
            let c = 4 + rng.below(253) as usize;
            let ell = 2 + rng.below(c as u64 - 1) as usize;
            (base_seed.wrapping_add(i as u64 + 1), d, c, ell)
        })
        .collect()
}

/// Randomly initialised weights for every tensor `manifest` declares.
///
/// Each tensor draws from its own stream keyed by name, so values do not
/// depend on layer order. Weights are He-normal, biases `N(0, 0.01²)`, BN
/// scale `1 + N(0, 0.1²)`, shift and mean `N(0, 0.1²)`, variance
/// `1 + |N(0, 0.1²)|`.
pub fn random_archive(manifest: &ModelManifest, seed: u64) -> Result<TensorArchive> {
    let mut tensors = Vec::new();
    for layer in &manifest.layers {
        for (role, shape) in TensorRole::expected(layer) {
            let name = role.tensor_name(&layer.name);
            let mut rng = CounterRng::new(stream_seed(seed, &name));
            let n: usize = shape.iter().product();
            let mut draw = |f: &dyn Fn(f64) -> f64| (0..n).map(|_| f(rng.standard_normal()) as f32).collect::<Vec<_>>();
            let data = match (layer.kind, role) {
                (LayerKind::Bn, TensorRole::Weight) => draw(&|z| 1.0 + 0.1 * z),
                (LayerKind::Bn, TensorRole::RunningVar) => draw(&|z| 1.0 + (0.1 * z).abs()),
                (LayerKind::Bn, _) => draw(&|z| 0.1 * z),
                (_, TensorRole::Weight) => {
                    let std = (2.0 / layer.filter_len() as f64).sqrt();
                    draw(&|z| std * z)
                }
                _ => draw(&|z| 0.01 * z),
            };
            tensors.push(WeightTensor::new(name, shape, data)?);
        }
    }
    TensorArchive::new(manifest.clone(), tensors)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_case_is_self_consistent() {
        let (case, archive) = generate_case(1, 4, 4, 2).unwrap();
        let omega = reference_fd(&gaussian_matrix(1, 4, 4), 2).unwrap();
        assert_eq!(case.omega_checksum, checksum(&omega));
        assert_eq!(case, generate_case(1, 4, 4, 2).unwrap().0);
        assert_eq!(archive.weight("conv").unwrap().shape, vec![4, 4, 1, 1]);
    }

    #[test]
    fn sweep_stays_in_range() {
        for (_, d, c, ell) in sweep_parameters(7, 500) {
            assert!((8..=512).contains(&d));
            assert!((4..=256).contains(&c));
            assert!((2..=c).contains(&ell));
        }
    }

    #[test]
    fn checksum_depends_on_shape() {
        let a = Matrix::<f64>::zeros(2, 3);
        let b = Matrix::<f64>::zeros(3, 2);
        assert_ne!(checksum(&a), checksum(&b));
        assert_eq!(checksum(&a).len(), 64);
    }
}
