//! Frequent Directions sketching of a filter matrix.
//!
//! Columns of `W` (one flattened filter each) stream into a `d × ℓ` buffer.
//! Whenever the buffer is full it is rotated onto its singular basis and
//! every squared singular value is reduced by `δ = s_k²`, `k = ⌈ℓ/2⌉`, which
//! zeroes at least half of the columns. The result satisfies
//! `0 ≼ ΩΩᵀ ≼ WWᵀ` and `‖WWᵀ − ΩΩᵀ‖₂ ≤ (2/ℓ)‖W‖_F²`.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{complete_orthonormal, fix_sign, symmetric_eigen};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Output of [`fd_sketch`].
#[derive(Debug, Clone, PartialEq)]
pub struct SketchResult<T> {
    /// `d × ℓ` sketch.
    pub omega: Matrix<T>,
    pub shrink_count: usize,
    pub elapsed_seconds: f64,
    pub fro_norm_omega: T,
}

/// Full record of one shrink step.
///
/// With `r = min(d, ℓ)`: `u` is `d × r` with orthonormal columns, `v` is
/// `ℓ × r` with orthonormal columns, and `s`, `s_hat` have length `ℓ`
/// (entries past `r` are zero).
#[derive(Debug, Clone)]
pub struct SvdShrinkState<T> {
    pub u: Matrix<T>,
    pub s: Vec<T>,
    pub v: Matrix<T>,
    pub delta: T,
    pub s_hat: Vec<T>,
    /// 1-based position `k` with `delta == s[k-1]²`.
    pub shrink_index: usize,
}

/// Number of columns kept for rate `p` out of `c`: `p·c` rounded half-up,
/// clamped to `[1, c]`.
pub fn sketch_size(rate: f64, channels: usize) -> Result<usize> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(Error::InvalidRate(rate));
    }
    if channels == 0 {
        return Err(Error::DimensionMismatch("channel count must be positive".into()));
    }
    // the nudge keeps products like 0.35·10 = 3.4999… on the intended side
    let rounded = (rate * channels as f64 + 0.5 + 1e-9).floor() as usize;
    Ok(rounded.clamp(1, channels))
}

/// `k = ⌈ℓ/2⌉`, so at least `⌈ℓ/2⌉` columns vanish after a shrink.
pub fn shrink_index(ell: usize) -> usize {
    ell.div_ceil(2)
}

/// Streaming sketcher. Slots are tracked by a fill counter, so a zero input
/// column still consumes a slot.
#[derive(Debug, Clone)]
pub struct FrequentDirections<T> {
    buffer: Matrix<T>,
    filled: usize,
    shrinks: usize,
}

impl<T: Scalar> FrequentDirections<T> {
    pub fn new(rows: usize, ell: usize) -> Result<Self> {
        if ell == 0 {
            return Err(Error::DimensionMismatch("sketch size must be at least 1".into()));
        }
        Ok(Self { buffer: Matrix::zeros(rows, ell), filled: 0, shrinks: 0 })
    }

    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn shrink_count(&self) -> usize {
        self.shrinks
    }

    pub fn sketch(&self) -> &Matrix<T> {
        &self.buffer
    }

    pub fn push(&mut self, column: &[T]) -> Result<()> {
        if column.len() != self.buffer.rows() {
            return Err(Error::DimensionMismatch(format!(
                "column has {} entries, sketch has {} rows",
                column.len(),
                self.buffer.rows()
            )));
        }
        self.buffer.col_mut(self.filled).copy_from_slice(column);
        self.filled += 1;
        if self.filled == self.buffer.cols() {
            self.filled = shrink_in_place(&mut self.buffer)?;
            self.shrinks += 1;
        }
        Ok(())
    }

    pub fn into_sketch(self) -> Matrix<T> {
        self.buffer
    }
}

/// Sketches the columns of `w` into `ell` columns.
pub fn fd_sketch<T: Scalar>(w: &Matrix<T>, ell: usize) -> Result<SketchResult<T>> {
    if !w.is_finite() {
        return Err(Error::NonFinite("filter matrix".into()));
    }
    let start = Instant::now();
    let mut fd = FrequentDirections::new(w.rows(), ell)?;
    for j in 0..w.cols() {
        fd.push(w.col(j))?;
    }
    let shrink_count = fd.shrink_count();
    let omega = fd.into_sketch();
    let fro_norm_omega = omega.frobenius_norm();
    Ok(SketchResult { omega, shrink_count, elapsed_seconds: start.elapsed().as_secs_f64(), fro_norm_omega })
}

/// Returns `Ω / ‖Ω‖_F`.
pub fn frobenius_normalize<T: Scalar>(result: &SketchResult<T>) -> Result<Matrix<T>> {
    let norm = result.fro_norm_omega;
    if norm == T::zero() || result.omega.is_zero() {
        return Err(Error::DegenerateSketch);
    }
    let data = result.omega.as_slice().iter().map(|&x| x / norm).collect();
    Ok(Matrix::from_col_major(result.omega.rows(), result.omega.cols(), data))
}

/// Singular spectrum of the buffer plus whichever side of the basis is
/// cheaper to obtain from a Gram eigendecomposition.
struct Spectrum<T> {
    s: Vec<T>,
    basis: Basis<T>,
}

enum Basis<T> {
    /// `d ≥ ℓ`: right singular vectors from `ΩᵀΩ`.
    Right(Matrix<T>),
    /// `d < ℓ`: left singular vectors from `ΩΩᵀ`.
    Left(Matrix<T>),
}

fn spectrum<T: Scalar>(omega: &Matrix<T>) -> Result<Spectrum<T>> {
    let (d, ell) = omega.shape();
    let root = |l: T| l.max(T::zero()).sqrt();
    if d >= ell {
        let eig = symmetric_eigen(&omega.gram_cols())?;
        Ok(Spectrum { s: eig.values.into_iter().map(root).collect(), basis: Basis::Right(eig.vectors) })
    } else {
        let eig = symmetric_eigen(&omega.gram_rows())?;
        let mut s: Vec<T> = eig.values.into_iter().map(root).collect();
        s.resize(ell, T::zero());
        Ok(Spectrum { s, basis: Basis::Left(eig.vectors) })
    }
}

/// `(δ, Ŝ)` for singular values `s` (non-increasing).
fn shrunk_values<T: Scalar>(s: &[T]) -> (T, Vec<T>) {
    let k = shrink_index(s.len());
    let delta = s[k - 1] * s[k - 1];
    let s_hat = s.iter().map(|&x| (x * x - delta).max(T::zero()).sqrt()).collect();
    (delta, s_hat)
}

/// Columns `u_j·Ŝ_j` for the leading `kept` singular directions, each
/// `u_j` sign-normalized.
fn rotated_columns<T: Scalar>(omega: &Matrix<T>, spec: &Spectrum<T>, s_hat: &[T], kept: usize) -> Matrix<T> {
    match &spec.basis {
        Basis::Right(v) => {
            // Ω·v_j = s_j·u_j, so rescale by Ŝ_j/s_j
            let mut p = omega.matmul(&v.leading_cols(kept));
            for j in 0..kept {
                let col = p.col_mut(j);
                fix_sign(col);
                let f = s_hat[j] / spec.s[j];
                col.iter_mut().for_each(|x| *x *= f);
            }
            p
        }
        Basis::Left(u) => {
            let mut p = u.leading_cols(kept);
            for j in 0..kept {
                let col = p.col_mut(j);
                fix_sign(col);
                col.iter_mut().for_each(|x| *x *= s_hat[j]);
            }
            p
        }
    }
}

/// One shrink on a full buffer; returns the number of non-zero columns left,
/// which occupy the leading slots.
fn shrink_in_place<T: Scalar>(omega: &mut Matrix<T>) -> Result<usize> {
    let spec = spectrum(omega)?;
    let (_, s_hat) = shrunk_values(&spec.s);
    let kept = s_hat.iter().take_while(|&&x| x > T::zero()).count();
    let cols = rotated_columns(omega, &spec, &s_hat, kept);
    let n = cols.as_slice().len();
    let buf = omega.as_mut_slice();
    buf[..n].copy_from_slice(cols.as_slice());
    buf[n..].iter_mut().for_each(|x| *x = T::zero());
    Ok(kept)
}

/// SVD shrink of a full sketch buffer. Returns the decomposition and the
/// updated buffer `U·diag(Ŝ)`.
pub fn svd_shrink<T: Scalar>(omega: &Matrix<T>) -> Result<(SvdShrinkState<T>, Matrix<T>)> {
    let (d, ell) = omega.shape();
    if ell == 0 {
        return Err(Error::DimensionMismatch("empty sketch buffer".into()));
    }
    if !omega.is_finite() {
        return Err(Error::NonFinite("sketch buffer".into()));
    }
    let spec = spectrum(omega)?;
    let (delta, s_hat) = shrunk_values(&spec.s);
    let kept = s_hat.iter().take_while(|&&x| x > T::zero()).count();

    let mut updated = Matrix::zeros(d, ell);
    let cols = rotated_columns(omega, &spec, &s_hat, kept);
    updated.as_mut_slice()[..cols.as_slice().len()].copy_from_slice(cols.as_slice());

    let r = d.min(ell);
    let tiny = T::epsilon() * T::lit(ell.max(d) as f64) * spec.s[0];
    let significant = spec.s.iter().take(r).take_while(|&&x| x > tiny).count();
    let (u, v) = match spec.basis {
        Basis::Right(mut v) => {
            let p = omega.matmul(&v);
            let mut u = Matrix::zeros(d, r);
            for j in 0..significant {
                let col = u.col_mut(j);
                col.copy_from_slice(p.col(j));
                if fix_sign(col) {
                    v.col_mut(j).iter_mut().for_each(|x| *x = -*x);
                }
                let s = spec.s[j];
                col.iter_mut().for_each(|x| *x /= s);
            }
            complete_orthonormal(&mut u, significant);
            (u, v.leading_cols(r))
        }
        Basis::Left(mut u) => {
            for j in 0..r {
                fix_sign(u.col_mut(j));
            }
            let p = omega.t_matmul(&u);
            let mut v = Matrix::zeros(ell, r);
            for j in 0..significant {
                let s = spec.s[j];
                for (dst, &x) in v.col_mut(j).iter_mut().zip(p.col(j)) {
                    *dst = x / s;
                }
            }
            complete_orthonormal(&mut v, significant);
            (u, v)
        }
    };
    let state = SvdShrinkState { u, s: spec.s, v, delta, s_hat, shrink_index: shrink_index(ell) };
    Ok((state, updated))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sketch_size_examples() {
        assert_eq!(sketch_size(1.0, 16).unwrap(), 16);
        assert_eq!(sketch_size(0.6, 16).unwrap(), 10);
        assert_eq!(sketch_size(0.25, 10).unwrap(), 3);
        assert_eq!(sketch_size(0.01, 10).unwrap(), 1);
        assert_eq!(sketch_size(0.35, 10).unwrap(), 4);
    }

    #[test]
    fn sketch_size_rejects_bad_rates() {
        for p in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(sketch_size(p, 8), Err(Error::InvalidRate(_))));
        }
    }

    #[test]
    fn zero_matrix_shrinks_once() {
        let w = Matrix::<f64>::zeros(4, 6);
        let r = fd_sketch(&w, 4).unwrap();
        assert_eq!(r.omega, Matrix::zeros(4, 4));
        assert_eq!(r.shrink_count, 1);
        assert_eq!(r.fro_norm_omega, 0.0);
    }

    #[test]
    fn fewer_columns_than_slots_is_exact() {
        let w = Matrix::from_fn(4, 3, |i, j| (i as f64 - 1.5) * (j as f64 + 0.5));
        let r = fd_sketch(&w, 4).unwrap();
        assert_eq!(r.shrink_count, 0);
        assert_eq!(r.omega.leading_cols(3), w);
        assert!(r.omega.col(3).iter().all(|&x| x == 0.0));
        assert_eq!(r.omega.matmul_t(&r.omega), w.matmul_t(&w));
    }

    #[test]
    fn identity_with_two_slots_vanishes() {
        let r = fd_sketch(&Matrix::<f64>::identity(4), 2).unwrap();
        assert_eq!(r.omega, Matrix::zeros(4, 2));
        assert_eq!(r.shrink_count, 2);
    }

    #[test]
    fn shrink_of_diag_two_one() {
        let omega = Matrix::from_diagonal(2, 2, &[2.0, 1.0]);
        let (state, updated) = svd_shrink(&omega).unwrap();
        assert_eq!(state.s, vec![2.0, 1.0]);
        assert_eq!(state.shrink_index, 1);
        assert_eq!(state.delta, 4.0);
        assert_eq!(state.s_hat, vec![0.0, 0.0]);
        assert_eq!(updated, Matrix::zeros(2, 2));
    }

    #[test]
    fn shrink_of_orthonormal_columns_vanishes() {
        let s = 0.5f64.sqrt();
        let omega = Matrix::from_col_major(3, 2, vec![s, s, 0.0, 0.0, 0.0, 1.0]);
        let (_, updated) = svd_shrink(&omega).unwrap();
        assert!(updated.is_zero());
    }

    #[test]
    fn shrink_of_three_one_one_one() {
        // U·diag(3,1,1,1)·Vᵀ with a rotation on each side
        let c: f64 = 0.6;
        let s = 0.8;
        let rot = Matrix::from_col_major(4, 4, vec![c, s, 0.0, 0.0, -s, c, 0.0, 0.0, 0.0, 0.0, c, -s, 0.0, 0.0, s, c]);
        let omega = rot.matmul(&Matrix::from_diagonal(4, 4, &[3.0, 1.0, 1.0, 1.0])).matmul_t(&rot);
        let (state, updated) = svd_shrink(&omega).unwrap();
        assert_eq!(state.shrink_index, 2);
        assert!((state.delta - 1.0).abs() < 1e-12);
        assert!((state.s_hat[0] - 8f64.sqrt()).abs() < 1e-12);
        assert!(state.s_hat[1..].iter().all(|&x| x == 0.0));
        assert!(updated.col(1).iter().chain(updated.col(2)).chain(updated.col(3)).all(|&x| x == 0.0));
        // u_1 = (0.6, 0.8, 0, 0) after the sign rule
        let expect = [0.6 * 8f64.sqrt(), 0.8 * 8f64.sqrt(), 0.0, 0.0];
        for (a, b) in updated.col(0).iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shrink_state_is_consistent() {
        let omega = Matrix::from_fn(6, 4, |i, j| ((i * 5 + j * 3) % 7) as f64 - 3.0 + 0.1 * j as f64);
        let (st, updated) = svd_shrink(&omega).unwrap();
        assert!(st.s.windows(2).all(|w| w[0] >= w[1]));
        for (sh, s) in st.s_hat.iter().zip(&st.s) {
            assert_eq!(*sh, (s * s - st.delta).max(0.0).sqrt());
        }
        assert!(st.s_hat[2..].iter().all(|&x| x == 0.0));
        let recon = Matrix::from_fn(6, 4, |i, j| st.u[(i, j)] * st.s[j]).matmul_t(&st.v);
        assert!(recon.sub(&omega).max_abs() < 1e-12);
        let uu = st.u.t_matmul(&st.u).sub(&Matrix::identity(4));
        assert!(uu.max_abs() < 1e-12);
        let shrunk = Matrix::from_fn(6, 4, |i, j| st.u[(i, j)] * st.s_hat[j]);
        assert!(shrunk.sub(&updated).max_abs() < 1e-12);
        let g = updated.t_matmul(&updated);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(g[(i, j)].abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn wide_buffer_keeps_rank() {
        // d < ℓ: rank ≤ d so δ = 0 and the Gram matrix is preserved
        let w = Matrix::from_fn(2, 6, |i, j| (i as f64 + 1.0) * ((j * 3 % 5) as f64 - 2.0) + j as f64 * 0.1);
        let r = fd_sketch(&w, 6).unwrap();
        assert_eq!(r.shrink_count, 1);
        let diff = w.matmul_t(&w).sub(&r.omega.matmul_t(&r.omega));
        assert!(diff.max_abs() < 1e-10);
        assert!(r.omega.col(2).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn normalize_examples() {
        let unit = SketchResult { omega: Matrix::from_diagonal(2, 2, &[0.6, 0.8]), shrink_count: 0, elapsed_seconds: 0.0, fro_norm_omega: 1.0 };
        assert_eq!(frobenius_normalize(&unit).unwrap(), unit.omega);
        let two_i = Matrix::<f64>::identity(3).scaled(2.0);
        let r = SketchResult { fro_norm_omega: two_i.frobenius_norm(), omega: two_i, shrink_count: 0, elapsed_seconds: 0.0 };
        let n = frobenius_normalize(&r).unwrap();
        assert!((n[(0, 0)] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((n.frobenius_norm() - 1.0).abs() < 1e-12);
        let zero = SketchResult { omega: Matrix::<f64>::zeros(2, 2), shrink_count: 1, elapsed_seconds: 0.0, fro_norm_omega: 0.0 };
        assert!(matches!(frobenius_normalize(&zero), Err(Error::DegenerateSketch)));
    }

    #[test]
    fn rejects_non_finite_and_empty_sketch() {
        let mut w = Matrix::<f64>::zeros(2, 2);
        w[(0, 1)] = f64::INFINITY;
        assert!(matches!(fd_sketch(&w, 2), Err(Error::NonFinite(_))));
        assert!(fd_sketch(&Matrix::<f64>::zeros(2, 2), 0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let w = Matrix::from_fn(8, 12, |i, j| ((i * 7 + j * 11) % 13) as f32 / 13.0 - 0.5);
        let r = fd_sketch(&w, 4).unwrap();
        assert_eq!(r.omega.shape(), (8, 4));
        assert!(r.shrink_count >= 1);
    }
}
