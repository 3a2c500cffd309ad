//! Thin wrappers over the dense SVD shared by the rest of the crate.

use nalgebra::{DMatrix, DVector, SVD};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("SVD did not converge")]
    SvdFailed,
}

/// Thin SVD `M = U·diag(σ)·Vᵀ` with `σ` sorted non-increasing.
///
/// `u` is `rows × k`, `v_t` is `k × cols` with `k = min(rows, cols)`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

pub fn check_finite(m: &DMatrix<f64>) -> Result<(), LinalgError> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(LinalgError::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

pub fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd, LinalgError> {
    check_finite(m)?;
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(rows, 0),
            singular_values: DVector::zeros(0),
            v_t: DMatrix::zeros(0, cols),
        });
    }
    let svd = SVD::try_new(m.clone(), true, true, f64::EPSILON, 0).ok_or(LinalgError::SvdFailed)?;
    let u = svd.u.ok_or(LinalgError::SvdFailed)?;
    let v_t = svd.v_t.ok_or(LinalgError::SvdFailed)?;
    Ok(ThinSvd { u, singular_values: svd.singular_values, v_t })
}

pub fn singular_values(m: &DMatrix<f64>) -> Result<DVector<f64>, LinalgError> {
    check_finite(m)?;
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, 0).ok_or(LinalgError::SvdFailed)?;
    Ok(svd.singular_values)
}

/// Relative cutoff below which singular values are treated as zero.
pub const PINV_RTOL: f64 = 1e-10;

/// Moore–Penrose pseudoinverse; singular values below `PINV_RTOL·σ_max` are dropped.
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>, LinalgError> {
    let svd = thin_svd(m)?;
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cutoff = PINV_RTOL * smax;
    let k = svd.singular_values.len();
    let mut v_scaled = svd.v_t.transpose();
    for c in 0..k {
        let s = svd.singular_values[c];
        let inv = if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 };
        v_scaled.column_mut(c).scale_mut(inv);
    }
    Ok(v_scaled * svd.u.transpose())
}

/// Numerical rank with the same relative cutoff as [`pinv`].
pub fn numerical_rank(m: &DMatrix<f64>) -> Result<usize, LinalgError> {
    let sv = singular_values(m)?;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > PINV_RTOL * smax).count())
}

/// `‖M − M_k‖²_F`, the error of the best rank-`k` approximation.
pub fn truncation_error_sq(m: &DMatrix<f64>, k: usize) -> Result<f64, LinalgError> {
    let sv = singular_values(m)?;
    Ok(sv.iter().skip(k).map(|s| s * s).sum())
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |i, j| m[(rows[i], j)])
}
