//! Weight tensors, the model manifest, and the on-disk archive format.

mod archive;
mod manifest;
pub mod npy;

pub use archive::{load_archive, save_archive, TensorArchive, TensorEntry, TensorRole, MANIFEST_FILE};
pub use manifest::{LayerKind, LayerSpec, ModelManifest, MANIFEST_SCHEMA};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// A named dense `f32` tensor stored row-major.
#[derive(Debug, Clone)]
pub struct WeightTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl PartialEq for WeightTensor {
    /// Bit-level equality, so `-0.0 != 0.0`.
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.shape == other.shape
            && self.data.len() == other.data.len()
            && self.data.iter().zip(&other.data).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

impl WeightTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let name = name.into();
        let count: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) || count != data.len() {
            return Err(Error::ShapeMismatch { name, expected: shape, found: vec![data.len()] });
        }
        Ok(Self { name, shape, data })
    }

    pub fn filled(name: impl Into<String>, shape: Vec<usize>, value: f32) -> Self {
        let count = shape.iter().product();
        Self { name: name.into(), shape, data: vec![value; count] }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `[c, c_in, h, w]` view; 2-D `[out, in]` tensors are read as 1×1 kernels.
    pub(crate) fn as_4d(&self) -> Result<[usize; 4]> {
        match *self.shape.as_slice() {
            [c, ci, h, w] => Ok([c, ci, h, w]),
            [c, ci] => Ok([c, ci, 1, 1]),
            _ => Err(Error::DimensionMismatch(format!("tensor `{}` has shape {:?}, expected 4-D", self.name, self.shape))),
        }
    }
}

/// Column `j` of the result is filter `j` flattened in (input-channel,
/// kernel-row, kernel-col) order, so the matrix is `(c_in·h·w) × c`.
pub fn flatten_filters<T: Scalar>(t: &WeightTensor) -> Result<Matrix<T>> {
    if t.shape.len() != 4 {
        return Err(Error::DimensionMismatch(format!("flatten_filters needs a 4-D tensor, `{}` is {:?}", t.name, t.shape)));
    }
    filter_matrix(t)
}

/// [`flatten_filters`] that also accepts 2-D fully-connected weights.
pub fn filter_matrix<T: Scalar>(t: &WeightTensor) -> Result<Matrix<T>> {
    let [c, ci, h, w] = t.as_4d()?;
    // row-major [c, ci, h, w] is already column-major (ci·h·w) × c
    Ok(Matrix::from_col_major(ci * h * w, c, t.data.iter().map(|&v| T::from_storage(v)).collect()))
}

/// Inverse of [`flatten_filters`].
pub fn unflatten_filters<T: Scalar>(m: &Matrix<T>, c_in: usize, h: usize, w: usize, name: &str) -> Result<WeightTensor> {
    if m.rows() != c_in * h * w {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows but c_in·h·w = {}·{}·{} = {}",
            m.rows(),
            c_in,
            h,
            w,
            c_in * h * w
        )));
    }
    let data = m.as_slice().iter().map(|&v| v.to_storage()).collect();
    WeightTensor::new(name, vec![m.cols(), c_in, h, w], data)
}

/// Input-channel view: `(c·h·w) × c_in`, column `k` stacks the `h×w` slices
/// of input channel `k` across all `c` filters.
pub fn channel_matrix<T: Scalar>(t: &WeightTensor) -> Result<Matrix<T>> {
    let [c, ci, h, w] = t.as_4d()?;
    let hw = h * w;
    let mut m = Matrix::zeros(c * hw, ci);
    for k in 0..ci {
        let col = m.col_mut(k);
        for f in 0..c {
            let src = &t.data[(f * ci + k) * hw..(f * ci + k + 1) * hw];
            for (dst, &v) in col[f * hw..(f + 1) * hw].iter_mut().zip(src) {
                *dst = T::from_storage(v);
            }
        }
    }
    Ok(m)
}

/// Inverse of [`channel_matrix`]; `shape` is the original tensor shape with
/// the input-channel axis replaced by `m.cols()`.
pub fn from_channel_matrix<T: Scalar>(m: &Matrix<T>, shape: &[usize], name: &str) -> Result<WeightTensor> {
    let (c, h, w) = match *shape {
        [c, _, h, w] => (c, h, w),
        [c, _] => (c, 1, 1),
        _ => return Err(Error::DimensionMismatch(format!("unsupported shape {shape:?}"))),
    };
    let hw = h * w;
    let ci = m.cols();
    if m.rows() != c * hw {
        return Err(Error::DimensionMismatch(format!("channel matrix has {} rows, expected {}", m.rows(), c * hw)));
    }
    let mut data = vec![0f32; c * ci * hw];
    for k in 0..ci {
        let col = m.col(k);
        for f in 0..c {
            for (dst, &v) in data[(f * ci + k) * hw..(f * ci + k + 1) * hw].iter_mut().zip(&col[f * hw..(f + 1) * hw]) {
                *dst = v.to_storage();
            }
        }
    }
    let mut new_shape = shape.to_vec();
    new_shape[1] = ci;
    WeightTensor::new(name, new_shape, data)
}
