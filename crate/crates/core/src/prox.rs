//! Matrix norms, shrinkage operators and the angular weight matrix.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{self, LinalgError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProxError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("threshold must be nonnegative and finite, got {0}")]
    NegativeThreshold(f64),
    #[error("threshold matrix is {found:?}, input is {expected:?}")]
    ShapeMismatch { expected: (usize, usize), found: (usize, usize) },
    #[error("sample column {0} is all zeros; its angle to other samples is undefined")]
    ZeroColumn(usize),
    #[error("angular floor must be positive, got {0}")]
    NonPositiveFloor(f64),
}

/// `Σᵢ ‖mⁱ‖₂`, the sum of row norms.
pub fn l21_norm(m: &DMatrix<f64>) -> Result<f64, ProxError> {
    linalg::check_finite(m)?;
    Ok(m.row_iter().map(|r| r.norm()).sum())
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64, ProxError> {
    Ok(linalg::singular_values(m)?.sum())
}

/// Threshold for [`soft_threshold`]: one value for every entry, or one per entry.
#[derive(Debug, Clone, Copy)]
pub enum Threshold<'a> {
    Scalar(f64),
    Entrywise(&'a DMatrix<f64>),
}

#[inline]
pub fn shrink(k: f64, mu: f64) -> f64 {
    let a = k.abs();
    if !(a > mu) {
        return 0.0;
    }
    let mut l = a - mu;
    // rounding can leave |k| − l one ulp above mu; the certificate needs ≤
    while a - l > mu {
        l = l.next_up();
    }
    l * signum(k)
}

#[inline]
fn signum(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Entrywise `max{|K_ij| − μ_ij, 0}·sgn(K_ij)`, the prox of the (weighted) ℓ1 norm.
pub fn soft_threshold(k: &DMatrix<f64>, mu: Threshold<'_>) -> Result<DMatrix<f64>, ProxError> {
    match mu {
        Threshold::Scalar(mu) => {
            if !(mu >= 0.0) || !mu.is_finite() {
                return Err(ProxError::NegativeThreshold(mu));
            }
            Ok(k.map(|v| shrink(v, mu)))
        }
        Threshold::Entrywise(mu) => {
            if mu.shape() != k.shape() {
                return Err(ProxError::ShapeMismatch { expected: k.shape(), found: mu.shape() });
            }
            if let Some(&bad) = mu.iter().find(|&&t| !(t >= 0.0) || t.is_nan()) {
                return Err(ProxError::NegativeThreshold(bad));
            }
            Ok(k.zip_map(mu, shrink))
        }
    }
}

/// Singular value thresholding `U·diag(max(σ − μ, 0))·Vᵀ`, the prox of `μ‖·‖*`.
pub fn svt(k: &DMatrix<f64>, mu: f64) -> Result<DMatrix<f64>, ProxError> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(ProxError::NegativeThreshold(mu));
    }
    let svd = linalg::thin_svd(k)?;
    let mut u = svd.u;
    for (c, s) in svd.singular_values.iter().enumerate() {
        u.column_mut(c).scale_mut((s - mu).max(0.0));
    }
    Ok(u * svd.v_t)
}

/// n×n weights `T_ij = 1/(|cos θ_ij| + ς)` between sample columns.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularWeights {
    pub t: DMatrix<f64>,
    pub varsigma: f64,
}

pub const DEFAULT_VARSIGMA: f64 = 1e-8;

/// Angular weights between the columns of a d×n matrix.
///
/// The floor `ς` is added to every entry, not only where the cosine vanishes.
pub fn angular_weights(x: &DMatrix<f64>, varsigma: f64) -> Result<AngularWeights, ProxError> {
    if !(varsigma > 0.0) || !varsigma.is_finite() {
        return Err(ProxError::NonPositiveFloor(varsigma));
    }
    linalg::check_finite(x)?;
    let norms: Vec<f64> = x.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(ProxError::ZeroColumn(j));
    }
    let n = x.ncols();
    let gram = x.transpose() * x;
    let mut t = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let cos = (gram[(i, j)] / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            let w = 1.0 / (cos.abs() + varsigma);
            t[(i, j)] = w;
            t[(j, i)] = w;
        }
    }
    Ok(AngularWeights { t, varsigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn l21_examples() {
        assert_eq!(l21_norm(&DMatrix::zeros(3, 2)).unwrap(), 0.0);
        assert_eq!(l21_norm(&DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 0.0, 0.0])).unwrap(), 5.0);
        assert_eq!(l21_norm(&DMatrix::identity(2, 2)).unwrap(), 2.0);
        assert!(l21_norm(&DMatrix::from_row_slice(1, 1, &[f64::INFINITY])).is_err());
    }

    #[test]
    fn nuclear_examples() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        assert!((nuclear_norm(&d).unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(nuclear_norm(&DMatrix::zeros(2, 3)).unwrap(), 0.0);
        let ones = DMatrix::from_element(2, 2, 1.0);
        assert!((nuclear_norm(&ones).unwrap() - 2.0).abs() < 1e-12);
        assert!(nuclear_norm(&DMatrix::from_row_slice(1, 1, &[f64::NAN])).is_err());
    }

    #[test]
    fn nuclear_dominates_spectral() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random(4, 6, &mut rng);
        let sv = linalg::singular_values(&m).unwrap();
        assert!(nuclear_norm(&m).unwrap() >= sv[0]);
    }

    #[test]
    fn soft_threshold_examples() {
        let k = DMatrix::from_row_slice(1, 3, &[2.5, -0.5, -3.0]);
        let l = soft_threshold(&k, Threshold::Scalar(1.0)).unwrap();
        assert_eq!(l.as_slice(), &[1.5, 0.0, -2.0]);
        assert!(soft_threshold(&k, Threshold::Scalar(-1.0)).is_err());
        let bad = DMatrix::from_element(2, 2, 1.0);
        assert!(soft_threshold(&k, Threshold::Entrywise(&bad)).is_err());
        let neg = DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 1.0]);
        assert!(soft_threshold(&k, Threshold::Entrywise(&neg)).is_err());
    }

    #[test]
    fn svt_examples() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0]));
        let out = svt(&d, 2.0).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((out - expect).norm() < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = random(5, 4, &mut rng);
        assert!((svt(&k, 0.0).unwrap() - &k).norm() < 1e-12);
        assert!(svt(&k, -0.1).is_err());
    }

    #[test]
    fn svt_thresholds_singular_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = random(6, 4, &mut rng);
        let mu = 0.7;
        let out = svt(&k, mu).unwrap();
        let sk = linalg::singular_values(&k).unwrap();
        let so = linalg::singular_values(&out).unwrap();
        for (a, b) in sk.iter().zip(so.iter()) {
            assert!(((a - mu).max(0.0) - b).abs() < 1e-10);
        }
        assert!(linalg::numerical_rank(&out).unwrap() <= linalg::numerical_rank(&k).unwrap());
    }

    #[test]
    fn svt_beats_random_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let k = random(5, 4, &mut rng);
        let mu = 0.3;
        let obj = |l: &DMatrix<f64>| mu * nuclear_norm(l).unwrap() + 0.5 * (l - &k).norm_squared();
        let l = svt(&k, mu).unwrap();
        let best = obj(&l);
        for t in 0..1000 {
            let scale = [1e-1, 1e-2, 1e-3][t % 3];
            let p = DMatrix::from_fn(5, 4, |_, _| rng.random_range(-scale..scale));
            assert!(obj(&(&l + p)) >= best - 1e-12);
        }
    }

    fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        random(n, n, rng).qr().q()
    }

    #[test]
    fn svt_orthogonal_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let k = random(5, 3, &mut rng);
            let q = random_orthogonal(5, &mut rng);
            let p = random_orthogonal(3, &mut rng);
            let lhs = svt(&(&q * &k * p.transpose()), 0.4).unwrap();
            let rhs = &q * svt(&k, 0.4).unwrap() * p.transpose();
            assert!((lhs - rhs).norm() < 1e-8);
        }
    }

    #[test]
    fn angular_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        let w = angular_weights(&x, 1e-8).unwrap();
        assert!((w.t[(0, 1)] - 1.0).abs() < 1e-7);

        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let w = angular_weights(&x, 1e-8).unwrap();
        assert!((w.t[(0, 1)] - 1e8).abs() < 1e-6 * 1e8);

        // 60 degrees apart: cos = 0.5
        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 3f64.sqrt() / 2.0]);
        let w = angular_weights(&x, 1e-8).unwrap();
        assert!((w.t[(0, 1)] - 2.0).abs() < 1e-7);

        let x = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(angular_weights(&x, 1e-8).unwrap_err(), ProxError::ZeroColumn(1));
        assert!(angular_weights(&DMatrix::identity(2, 2), 0.0).is_err());
    }

    fn matrix_strategy(rows: usize, cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(-5.0f64..5.0, rows * cols)
            .prop_map(move |v| DMatrix::from_column_slice(rows, cols, &v))
    }

    proptest! {
        #[test]
        fn soft_threshold_non_expansive(a in matrix_strategy(3, 4), b in matrix_strategy(3, 4), mu in 0.0f64..3.0) {
            let sa = soft_threshold(&a, Threshold::Scalar(mu)).unwrap();
            let sb = soft_threshold(&b, Threshold::Scalar(mu)).unwrap();
            prop_assert!((sa - sb).norm() <= (a - b).norm() + 1e-12);
        }

        #[test]
        fn soft_threshold_certificate(k in matrix_strategy(3, 4), mu in matrix_strategy(3, 4)) {
            let mu = mu.abs();
            let l = soft_threshold(&k, Threshold::Entrywise(&mu)).unwrap();
            for idx in 0..k.len() {
                let (kv, lv, m) = (k[idx], l[idx], mu[idx]);
                prop_assert!(lv.abs() <= kv.abs());
                prop_assert!((kv - lv).abs() <= m + 1e-12);
                if lv != 0.0 {
                    prop_assert!(((kv - lv).abs() - m).abs() <= 1e-12);
                    prop_assert_eq!(signum(kv - lv), signum(lv));
                }
            }
        }

        #[test]
        fn frobenius_below_l21(m in matrix_strategy(4, 3)) {
            prop_assert!(m.norm() <= l21_norm(&m).unwrap() + 1e-12);
        }

        #[test]
        fn angular_invariants(x in matrix_strategy(3, 5)) {
            prop_assume!(x.column_iter().all(|c| c.norm() > 1e-3));
            let w = angular_weights(&x, 1e-8).unwrap();
            for i in 0..5 {
                prop_assert!((w.t[(i, i)] - 1.0).abs() < 1e-6);
                for j in 0..5 {
                    prop_assert_eq!(w.t[(i, j)], w.t[(j, i)]);
                    prop_assert!(w.t[(i, j)] >= 1.0 / (1.0 + 1e-8));
                }
            }
        }
    }
}
