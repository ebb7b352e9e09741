//! Symmetric eigendecomposition and the deterministic sign convention.
//!
//! The eigensolver is Householder tridiagonalization followed by implicit QL
//! with Wilkinson-style shifts (the EISPACK `tred2`/`tql2` pair). Every step
//! is homogeneous in the input scale, so scaling a matrix by a power of two
//! scales the eigenvalues exactly and leaves the eigenvectors bit-identical.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Eigenpairs of a symmetric matrix, eigenvalues in non-increasing order.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    /// Column `j` is the unit eigenvector for `values[j]`.
    pub vectors: Matrix<T>,
}

const MAX_QL_ITERATIONS: usize = 64;

/// Eigendecomposition of a symmetric matrix. Only the lower triangle is
/// trusted to be exactly symmetric; callers symmetrize beforehand.
pub fn symmetric_eigen<T: Scalar>(a: &Matrix<T>) -> Result<SymmetricEigen<T>> {
    let n = a.rows();
    if n != a.cols() {
        return Err(Error::DimensionMismatch(format!("eigensolver needs a square matrix, got {}x{}", n, a.cols())));
    }
    if !a.is_finite() {
        return Err(Error::Numerical("non-finite entry passed to eigensolver".into()));
    }
    if n == 0 {
        return Ok(SymmetricEigen { values: Vec::new(), vectors: Matrix::zeros(0, 0) });
    }
    // v[r + c·n] is V[r][c]
    let mut v = a.as_slice().to_vec();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).expect("finite eigenvalues").then(i.cmp(&j)));
    let values = order.iter().map(|&i| d[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(&v[src * n..(src + 1) * n]);
    }
    Ok(SymmetricEigen { values, vectors })
}

#[inline]
fn at(n: usize, r: usize, c: usize) -> usize {
    r + c * n
}

fn tred2<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) {
    let zero = T::zero();
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = zero;
                v[at(n, j, i)] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[at(n, j, i)] = f;
                g = e[j] + v[at(n, j, j)] * f;
                for k in (j + 1)..i {
                    let vkj = v[at(n, k, j)];
                    g += vkj * d[k];
                    e[k] += vkj * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[at(n, k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(n, i - 1, j)];
                v[at(n, i, j)] = zero;
            }
        }
        d[i] = h;
    }
    // accumulate transformations
    for i in 0..n - 1 {
        v[at(n, n - 1, i)] = v[at(n, i, i)];
        v[at(n, i, i)] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[at(n, k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[at(n, k, i + 1)] * v[at(n, k, j)];
                }
                for k in 0..=i {
                    v[at(n, k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(n, k, i + 1)] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[at(n, n - 1, j)];
        v[at(n, n - 1, j)] = zero;
    }
    v[at(n, n - 1, n - 1)] = T::one();
    e[0] = zero;
}

fn tql2<T: Scalar>(n: usize, v: &mut [T], d: &mut [T], e: &mut [T]) -> Result<()> {
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::Numerical(format!("QL iteration did not converge for eigenvalue {l}")));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (left, right) = v.split_at_mut((i + 1) * n);
                    let col_i = &mut left[i * n..];
                    let col_i1 = &mut right[..n];
                    for (vi, vi1) in col_i.iter_mut().zip(col_i1.iter_mut()) {
                        let hk = *vi1;
                        *vi1 = s * *vi + c * hk;
                        *vi = c * *vi - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("eigenvalue iteration produced a non-finite value".into()));
    }
    Ok(())
}

/// Flips `x` so that its largest-magnitude entry is positive; ties go to the
/// lowest index. Returns whether a flip happened.
pub fn fix_sign<T: Scalar>(x: &mut [T]) -> bool {
    let mut best = 0;
    let mut best_abs = T::zero();
    for (i, v) in x.iter().enumerate() {
        if v.abs() > best_abs {
            best_abs = v.abs();
            best = i;
        }
    }
    if best_abs > T::zero() && x[best] < T::zero() {
        for v in x.iter_mut() {
            *v = -*v;
        }
        true
    } else {
        false
    }
}

/// Triangular factor of a Householder QR: `min(d, n) × n` upper-trapezoidal
/// `R` with `AᵀA = RᵀR`, computed without forming `AᵀA`.
pub fn qr_r<T: Scalar>(a: &Matrix<T>) -> Matrix<T> {
    let (d, n) = a.shape();
    let k = d.min(n);
    let mut w = a.clone();
    let mut v = vec![T::zero(); d];
    for j in 0..k {
        let col = w.col(j);
        let scale = col[j..].iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if scale == T::zero() {
            continue;
        }
        let norm = scale * col[j..].iter().map(|&x| (x / scale) * (x / scale)).sum::<T>().sqrt();
        let alpha = if col[j] > T::zero() { -norm } else { norm };
        v[j..].copy_from_slice(&col[j..]);
        v[j] -= alpha;
        let vv: T = v[j..].iter().map(|&x| x * x).sum();
        if vv == T::zero() {
            continue;
        }
        let col = w.col_mut(j);
        col[j] = alpha;
        col[j + 1..].iter_mut().for_each(|x| *x = T::zero());
        for c in j + 1..n {
            let col = w.col_mut(c);
            let dot: T = v[j..].iter().zip(&col[j..]).map(|(&p, &q)| p * q).sum();
            let f = (dot + dot) / vv;
            for (x, &p) in col[j..].iter_mut().zip(&v[j..]) {
                *x -= f * p;
            }
        }
    }
    Matrix::from_fn(k, n, |i, j| if i <= j { w[(i, j)] } else { T::zero() })
}

/// Extends the orthonormal leading `filled` columns of `basis` to a full
/// orthonormal set by Gram–Schmidt against the standard basis.
pub fn complete_orthonormal<T: Scalar>(basis: &mut Matrix<T>, filled: usize) {
    let n = basis.rows();
    let mut next = filled;
    let mut candidate = 0;
    let threshold = T::lit(0.5);
    while next < basis.cols() && candidate < n {
        let mut x = vec![T::zero(); n];
        x[candidate] = T::one();
        candidate += 1;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for j in 0..next {
                let q = basis.col(j);
                let dot: T = q.iter().zip(&x).map(|(&a, &b)| a * b).sum();
                for (xi, &qi) in x.iter_mut().zip(q) {
                    *xi -= dot * qi;
                }
            }
        }
        let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm > threshold {
            for (dst, v) in basis.col_mut(next).iter_mut().zip(&x) {
                *dst = *v / norm;
            }
            next += 1;
        }
    }
}
