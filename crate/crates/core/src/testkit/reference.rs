use crate::error::{Error, Result};
use crate::matrix::Matrix;

const SWEEP_LIMIT: usize = 100;

/// Thin SVD `A·V = U·diag(s)` from one-sided (Hestenes) Jacobi.
///
/// `u` is `rows × cols`; columns belonging to zero singular values are left
/// zero. Values are sorted descending and every nonzero left vector has its
/// largest-magnitude entry positive (lowest index on ties).
#[derive(Debug, Clone)]
pub struct JacobiSvd {
    pub u: Matrix<f64>,
    pub s: Vec<f64>,
}

pub fn jacobi_svd(a: &Matrix<f64>) -> Result<JacobiSvd> {
    let (d, n) = a.shape();
    if !a.is_finite() {
        return Err(Error::NonFinite("jacobi_svd input".into()));
    }
    // loose tolerances leave residual rotation that close singular pairs amplify
    let tol = f64::EPSILON;
    // columns reduced to rounding noise of ‖A‖_F count as null
    let floor = (f64::EPSILON * a.frobenius_norm()).powi(2);
    let mut b = a.clone();
    let mut converged = false;
    for _ in 0..SWEEP_LIMIT {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..d {
                    let (x, y) = (b[(i, p)], b[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || alpha <= floor || beta <= floor || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..d {
                    let (x, y) = (b[(i, p)], b[(i, q)]);
                    b.col_mut(p)[i] = c * x - s * y;
                    b.col_mut(q)[i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }

    let norms: Vec<f64> = (0..n).map(|j| b.col(j).iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));

    let mut u = Matrix::zeros(d, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        // a d × n matrix has only min(d, n) singular values
        let sigma = if k < d { norms[j] } else { 0.0 };
        s.push(sigma);
        if sigma == 0.0 {
            continue;
        }
        let col: Vec<f64> = b.col(j).iter().map(|x| x / sigma).collect();
        let mut lead = 0;
        for (i, x) in col.iter().enumerate() {
            if x.abs() > col[lead].abs() {
                lead = i;
            }
        }
        let sign = if col[lead] < 0.0 { -1.0 } else { 1.0 };
        for (dst, x) in u.col_mut(k).iter_mut().zip(&col) {
            *dst = sign * x;
        }
    }
    Ok(JacobiSvd { u, s })
}

/// Frequent Directions transcribed step by step: an occupancy flag per
/// slot, a full SVD at every shrink, no shortcuts.
pub fn reference_fd(w: &Matrix<f64>, ell: usize) -> Result<Matrix<f64>> {
    let (d, c) = w.shape();
    if ell == 0 || d == 0 {
        return Err(Error::DimensionMismatch(format!("reference_fd needs ℓ ≥ 1 and d ≥ 1, got ℓ={ell}, d={d}")));
    }
    if !w.is_finite() {
        return Err(Error::NonFinite("reference_fd input".into()));
    }
    let mut omega = Matrix::zeros(d, ell);
    let mut occupied = vec![false; ell];
    for i in 0..c {
        let slot = occupied.iter().position(|&o| !o).expect("a free slot always exists after a shrink");
        omega.col_mut(slot).copy_from_slice(w.col(i));
        occupied[slot] = true;
        if occupied.iter().all(|&o| o) {
            let svd = jacobi_svd(&omega)?;
            let k = ell.div_ceil(2);
            let delta = svd.s[k - 1] * svd.s[k - 1];
            for j in 0..ell {
                let shrunk = (svd.s[j] * svd.s[j] - delta).max(0.0).sqrt();
                for r in 0..d {
                    omega.col_mut(j)[r] = svd.u[(r, j)] * shrunk;
                }
                occupied[j] = shrunk > 0.0;
            }
        }
    }
    Ok(omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_with_two_slots_vanishes() {
        let out = reference_fd(&Matrix::identity(4), 2).unwrap();
        assert!(out.is_zero());
        assert_eq!(out.shape(), (4, 2));
    }

    #[test]
    fn narrow_input_is_copied() {
        let w = Matrix::from_fn(5, 3, |i, j| (i * 3 + j) as f64 - 4.0);
        let out = reference_fd(&w, 4).unwrap();
        for j in 0..3 {
            assert_eq!(out.col(j), w.col(j));
        }
        assert!(out.col(3).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn svd_reconstructs() {
        let a = Matrix::from_fn(6, 4, |i, j| ((i * 5 + j * 3) % 7) as f64 - 2.5);
        let svd = jacobi_svd(&a).unwrap();
        assert!(svd.s.windows(2).all(|p| p[0] >= p[1]));
        // AAᵀ = U S² Uᵀ
        let us = Matrix::from_fn(6, 4, |i, j| svd.u[(i, j)] * svd.s[j]);
        let err = a.gram_rows().sub(&us.gram_rows()).max_abs();
        assert!(err < 1e-12, "{err}");
    }
}
