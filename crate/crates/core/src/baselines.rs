//! Comparison methods: uniform random sampling, variance-based feature
//! selection and leverage-score randomized CUR (R-CUR).

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, LinalgError};

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("budget {budget} exceeds available count {available}")]
    BudgetTooLarge { budget: usize, available: usize },
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("rank k = {k} must satisfy 1 <= k <= numerical rank {rank}")]
    RankOutOfRange { k: usize, rank: usize },
    #[error("eps = {0} must lie in (0, 1)")]
    InvalidEps(f64),
    #[error("leverage scores are all zero")]
    DegenerateScores,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("CUR error {err} is below the rank-{q} SVD bound {bound}")]
    LowerBoundViolated { err: f64, bound: f64, q: usize },
}

/// `m` distinct indices drawn uniformly from `0..n`, sorted ascending.
pub fn random_sampling(n: usize, m: usize, seed: u64) -> Result<Vec<usize>, BaselineError> {
    if m > n {
        return Err(BaselineError::BudgetTooLarge { budget: m, available: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, m).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Variance of each feature (row of the d×n matrix) across samples.
pub fn feature_variances(x: &DMatrix<f64>) -> Vec<f64> {
    let n = x.ncols() as f64;
    x.row_iter()
        .map(|row| {
            let mean = row.sum() / n;
            row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
        })
        .collect()
}

/// The `r` highest-variance features, in descending variance order (ties by index).
pub fn variance_feature_select(x: &DMatrix<f64>, r: usize) -> Result<Vec<usize>, BaselineError> {
    if r > x.nrows() {
        return Err(BaselineError::BudgetTooLarge { budget: r, available: x.nrows() });
    }
    let ranked = crate::selection::rank_desc(&feature_variances(x));
    Ok(ranked[..r].iter().map(|r| r.index).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeverageScores {
    /// Length n, one per sample (column of X); sums to k.
    pub column: DVector<f64>,
    /// Length d, one per feature (row of X); sums to k.
    pub row: DVector<f64>,
    /// `σ_k − σ_{k+1}` is within `1e-8·σ_1`, so the top-k subspace is not unique.
    pub degenerate: bool,
}

const GAP_RTOL: f64 = 1e-8;

pub fn leverage_scores(x: &DMatrix<f64>, k: usize) -> Result<LeverageScores, BaselineError> {
    let (d, n) = x.shape();
    let kmax = d.min(n);
    if k == 0 || k > kmax {
        return Err(BaselineError::RankOutOfRange { k, rank: kmax });
    }
    let svd = linalg::thin_svd(x)?;
    let sv = &svd.singular_values;
    let next = if k < sv.len() { sv[k] } else { 0.0 };
    let degenerate = sv[k - 1] - next <= GAP_RTOL * sv[0];
    let column = DVector::from_fn(n, |j, _| (0..k).map(|i| svd.v_t[(i, j)].powi(2)).sum());
    let row = DVector::from_fn(d, |j, _| (0..k).map(|i| svd.u[(j, i)].powi(2)).sum());
    Ok(LeverageScores { column, row, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// i.i.d. draws then deduplication; realized counts may fall short.
    #[default]
    WithReplacement,
    /// Weighted sampling without replacement; realized counts are exact.
    ExactCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RcurConfig {
    pub k: usize,
    /// Column (sample) draws.
    pub m: usize,
    /// Row (feature) draws.
    pub r: usize,
    pub eps: f64,
    pub seed: u64,
    #[serde(default)]
    pub mode: SamplingMode,
}

impl RcurConfig {
    pub fn validate(&self, d: usize, n: usize) -> Result<(), BaselineError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(BaselineError::InvalidEps(self.eps));
        }
        if self.m == 0 || self.r == 0 {
            return Err(BaselineError::ZeroBudget);
        }
        if self.m > n {
            return Err(BaselineError::BudgetTooLarge { budget: self.m, available: n });
        }
        if self.r > d {
            return Err(BaselineError::BudgetTooLarge { budget: self.r, available: d });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RcurResult {
    pub c: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub column_indices: Vec<usize>,
    pub row_indices: Vec<usize>,
    /// `‖X − CUR‖²_F`.
    pub err: f64,
    /// `‖X − X_k‖²_F`.
    pub svd_err_k: f64,
    /// `‖X − X_q‖²_F` with `q = min(m', r')`; `err` never falls below it.
    pub svd_err_q: f64,
    /// Whether `err ≤ (1 + eps)·svd_err_k` held for this draw.
    pub within_relative_error: bool,
    pub degenerate_scores: bool,
}

fn draw(scores: &DVector<f64>, count: usize, mode: SamplingMode, rng: &mut ChaCha8Rng) -> Result<Vec<usize>, BaselineError> {
    let weights: Vec<f64> = scores.iter().map(|&s| s.max(0.0)).collect();
    let mut idx = match mode {
        SamplingMode::WithReplacement => {
            let dist = WeightedIndex::new(&weights).map_err(|_| BaselineError::DegenerateScores)?;
            (0..count).map(|_| dist.sample(rng)).collect::<Vec<_>>()
        }
        SamplingMode::ExactCount => {
            let positive: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
            if positive.is_empty() {
                return Err(BaselineError::DegenerateScores);
            }
            let take = count.min(positive.len());
            let picked = rand::seq::index::sample_weighted(rng, positive.len(), |i| weights[positive[i]], take)
                .map_err(|_| BaselineError::DegenerateScores)?;
            let mut out: Vec<usize> = picked.iter().map(|i| positive[i]).collect();
            // zero-score indices fill any remaining budget, lowest first
            out.extend((0..weights.len()).filter(|&i| weights[i] <= 0.0).take(count - take));
            out
        }
    };
    idx.sort_unstable();
    idx.dedup();
    Ok(idx)
}

/// Leverage-score CUR with the optimal core `U = C⁺XR⁺`.
pub fn rcur(x: &DMatrix<f64>, cfg: &RcurConfig) -> Result<RcurResult, BaselineError> {
    let (d, n) = x.shape();
    cfg.validate(d, n)?;
    let rank = linalg::numerical_rank(x)?;
    if cfg.k == 0 || cfg.k > rank {
        return Err(BaselineError::RankOutOfRange { k: cfg.k, rank });
    }
    let scores = leverage_scores(x, cfg.k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let column_indices = draw(&scores.column, cfg.m, cfg.mode, &mut rng)?;
    let row_indices = draw(&scores.row, cfg.r, cfg.mode, &mut rng)?;
    let c = linalg::select_columns(x, &column_indices);
    let r = linalg::select_rows(x, &row_indices);
    let u = linalg::pinv(&c)? * x * linalg::pinv(&r)?;
    let err = (x - &c * &u * &r).norm_squared();
    let svd_err_k = linalg::truncation_error_sq(x, cfg.k)?;
    let q = column_indices.len().min(row_indices.len());
    let svd_err_q = linalg::truncation_error_sq(x, q)?;
    // tolerance only absorbs rounding in the two error computations
    if err < svd_err_q - 1e-9 * x.norm_squared().max(1.0) {
        return Err(BaselineError::LowerBoundViolated { err, bound: svd_err_q, q });
    }
    Ok(RcurResult {
        c,
        u,
        r,
        column_indices,
        row_indices,
        err,
        svd_err_k,
        svd_err_q,
        within_relative_error: err <= (1.0 + cfg.eps) * svd_err_k,
        degenerate_scores: scores.degenerate,
    })
}
