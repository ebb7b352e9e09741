use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{qr_r, symmetric_eigen};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Relative slack (times `‖W‖_F²`) granted to every certificate comparison.
pub const CERTIFICATE_SLACK: f64 = 1e-6;

/// Beyond this size the extreme eigenvalues come from power iteration.
const DENSE_LIMIT: usize = 4096;
const POWER_TOLERANCE: f64 = 1e-8;
const POWER_MAX_ITERATIONS: usize = 20_000;

/// How well `ΩΩᵀ` tracks `WWᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// `‖Σ_W − Σ_Ω‖_F` with column-mean centering.
    pub sigma_w_err: f64,
    /// `‖WWᵀ − ΩΩᵀ‖_F`.
    pub gram_err_fro: f64,
    /// `λ_max(WWᵀ − ΩΩᵀ)`.
    pub gram_err_spec: f64,
    /// `λ_min(WWᵀ − ΩΩᵀ)`.
    pub min_eig_diff: f64,
    /// `λ_min(ΩΩᵀ)`.
    pub min_eig_omega: f64,
    /// `(2/c̃)·‖W‖_F²`.
    pub epsilon_bound: f64,
    pub w_fro_sq: f64,
    /// Spectral certificate: `gram_err_spec ≤ epsilon_bound + slack`.
    pub bound_satisfied: bool,
    /// Same comparison with the Frobenius error; recorded, never enforced.
    pub frobenius_bound_satisfied: bool,
}

impl QualityReport {
    pub fn slack(&self) -> f64 {
        CERTIFICATE_SLACK * self.w_fro_sq
    }

    /// `0 ≼ ΩΩᵀ ≼ WWᵀ` up to the slack.
    pub fn psd_sandwich_holds(&self) -> bool {
        self.min_eig_diff >= -self.slack() && self.min_eig_omega >= -self.slack()
    }
}

/// Extreme eigenvalues and Frobenius norm of `AAᵀ − BBᵀ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramSpectrum {
    pub max: f64,
    pub min: f64,
    pub fro: f64,
}

/// Quality of sketch `omega` against `w`; `c_tilde` sets the bound.
pub fn sketch_quality<T: Scalar>(w: &Matrix<T>, omega: &Matrix<T>, c_tilde: usize) -> Result<QualityReport> {
    sketch_quality_with_limit(w, omega, c_tilde, DENSE_LIMIT)
}

pub(crate) fn sketch_quality_with_limit<T: Scalar>(
    w: &Matrix<T>,
    omega: &Matrix<T>,
    c_tilde: usize,
    dense_limit: usize,
) -> Result<QualityReport> {
    if w.rows() != omega.rows() {
        return Err(Error::DimensionMismatch(format!("W has {} rows but Ω has {}", w.rows(), omega.rows())));
    }
    if c_tilde == 0 {
        return Err(Error::DimensionMismatch("c̃ must be positive".into()));
    }
    let omega = nonzero_columns(omega);
    let diff = gram_difference_spectrum(w, &omega, dense_limit)?;
    let centered = gram_difference_spectrum(&centered(w), &centered_padded(&omega, c_tilde), dense_limit)?;
    let min_eig_omega = min_gram_eigenvalue(&omega, dense_limit)?;

    let w_fro = w.frobenius_norm().as_f64();
    let w_fro_sq = w_fro * w_fro;
    let epsilon_bound = 2.0 / c_tilde as f64 * w_fro_sq;
    let slack = CERTIFICATE_SLACK * w_fro_sq;
    Ok(QualityReport {
        sigma_w_err: centered.fro,
        gram_err_fro: diff.fro,
        gram_err_spec: diff.max,
        min_eig_diff: diff.min,
        min_eig_omega,
        epsilon_bound,
        w_fro_sq,
        bound_satisfied: diff.max <= epsilon_bound + slack,
        frobenius_bound_satisfied: diff.fro <= epsilon_bound + slack,
    })
}

fn nonzero_columns<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let idx: Vec<usize> = (0..m.cols()).filter(|&j| m.col(j).iter().any(|&x| x != T::zero())).collect();
    m.select_cols(&idx)
}

fn column_mean<T: Scalar>(m: &Matrix<T>, count: usize) -> Vec<T> {
    let mut mean = vec![T::zero(); m.rows()];
    for j in 0..m.cols() {
        for (acc, &x) in mean.iter_mut().zip(m.col(j)) {
            *acc += x;
        }
    }
    let n = T::lit(count.max(1) as f64);
    mean.iter_mut().for_each(|x| *x /= n);
    mean
}

fn centered<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    let mean = column_mean(m, m.cols());
    Matrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)] - mean[i])
}

/// Centers a sketch whose dropped all-zero columns still count towards the
/// `c̃`-column mean.
fn centered_padded<T: Scalar>(m: &Matrix<T>, c_tilde: usize) -> Matrix<T> {
    let total = c_tilde.max(m.cols());
    let mean = column_mean(m, total);
    Matrix::from_fn(m.rows(), total, |i, j| if j < m.cols() { m[(i, j)] - mean[i] } else { -mean[i] })
}

/// Spectrum of `AAᵀ − BBᵀ` without forming a `d × d` matrix when the
/// stacked `[A | B]` is narrower than tall.
pub fn gram_difference_spectrum<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, dense_limit: usize) -> Result<GramSpectrum> {
    let d = a.rows();
    let n = a.cols() + b.cols();
    if d == 0 {
        return Ok(GramSpectrum { max: 0.0, min: 0.0, fro: 0.0 });
    }
    if d <= n && d <= dense_limit {
        let diff = a.gram_rows().sub(&b.gram_rows());
        let eig = symmetric_eigen(&diff)?;
        return Ok(GramSpectrum {
            max: eig.values[0].as_f64(),
            min: eig.values[d - 1].as_f64(),
            fro: diff.frobenius_norm().as_f64(),
        });
    }
    if n <= dense_limit {
        // [A|B] = Q·[R_a|R_b], so AAᵀ − BBᵀ = Q·(R_a·R_aᵀ − R_b·R_bᵀ)·Qᵀ
        let r = qr_r(&a.hstack(b));
        let ra = r.leading_cols(a.cols());
        let rb = r.select_cols(&(a.cols()..n).collect::<Vec<_>>());
        let core = symmetrize(ra.matmul_t(&ra).sub(&rb.matmul_t(&rb)));
        let core_eig = symmetric_eigen(&core)?;
        let zero = T::zero();
        // d > n: at least d − n eigenvalues are exactly zero
        let max = core_eig.values.first().copied().unwrap_or(zero).max(zero);
        let min = core_eig.values.last().copied().unwrap_or(zero).min(zero);
        return Ok(GramSpectrum { max: max.as_f64(), min: min.as_f64(), fro: core.frobenius_norm().as_f64() });
    }
    power_spectrum(a, b)
}

fn symmetrize<T: Scalar>(m: Matrix<T>) -> Matrix<T> {
    let n = m.rows();
    Matrix::from_fn(n, n, |i, j| (m[(i, j)] + m[(j, i)]) * T::lit(0.5))
}

fn min_gram_eigenvalue<T: Scalar>(omega: &Matrix<T>, dense_limit: usize) -> Result<f64> {
    let (d, l) = omega.shape();
    if l == 0 {
        return Ok(0.0);
    }
    if d > l {
        // rank-deficient: λ_min(ΩΩᵀ) is 0, unless ΩᵀΩ is numerically indefinite
        if l > dense_limit {
            return Ok(0.0);
        }
        let eig = symmetric_eigen(&omega.gram_cols())?;
        return Ok(eig.values[l - 1].as_f64().min(0.0));
    }
    if d > dense_limit {
        let empty = Matrix::zeros(d, 0);
        return Ok(-power_spectrum(&empty, omega)?.max);
    }
    let eig = symmetric_eigen(&omega.gram_rows())?;
    Ok(eig.values[d - 1].as_f64())
}

/// Power-iteration fallback for very large Gram differences.
fn power_spectrum<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<GramSpectrum> {
    let apply = |x: &[f64]| -> Vec<f64> {
        let x = Matrix::from_col_major(x.len(), 1, x.iter().map(|&v| T::lit(v)).collect());
        let ya = a.matmul(&a.t_matmul(&x));
        let yb = b.matmul(&b.t_matmul(&x));
        ya.as_slice().iter().zip(yb.as_slice()).map(|(&p, &q)| (p - q).as_f64()).collect()
    };
    let d = a.rows();
    let dominant = power_iteration(d, 0.0, &apply)?;
    let other = power_iteration(d, dominant, &apply)? + dominant;
    // ‖AAᵀ − BBᵀ‖_F² = ‖AᵀA‖² + ‖BᵀB‖² − 2‖AᵀB‖²
    let fro_sq = |m: &Matrix<T>| m.frobenius_norm().as_f64().powi(2);
    let fro = (fro_sq(&a.gram_cols()) + fro_sq(&b.gram_cols()) - 2.0 * fro_sq(&a.t_matmul(b))).max(0.0).sqrt();
    Ok(GramSpectrum { max: dominant.max(other), min: dominant.min(other), fro })
}

/// Dominant eigenvalue of `D − shift·I` by power iteration with a
/// Rayleigh-quotient stopping rule.
fn power_iteration(n: usize, shift: f64, apply: &dyn Fn(&[f64]) -> Vec<f64>) -> Result<f64> {
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i % 7) as f64 / 7.0).collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let mut previous = f64::NAN;
    for _ in 0..POWER_MAX_ITERATIONS {
        let mut y = apply(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi -= shift * xi;
        }
        let rayleigh: f64 = y.iter().zip(&x).map(|(a, b)| a * b).sum();
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        if (rayleigh - previous).abs() <= POWER_TOLERANCE * rayleigh.abs().max(f64::MIN_POSITIVE) {
            return Ok(rayleigh);
        }
        previous = rayleigh;
        x = y.into_iter().map(|v| v / norm).collect();
    }
    Err(Error::Numerical("power iteration did not converge".into()))
}
