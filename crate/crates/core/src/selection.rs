//! Ranking samples and features from a solved `W`, CUR reconstruction error,
//! and an exhaustive oracle for tiny instances.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::data::{DataError, Dataset, SelectionRequest};
use crate::linalg::{self, LinalgError};

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error(transparent)]
    Budget(#[from] DataError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0} index set is empty")]
    EmptyIndexSet(&'static str),
    #[error("{what} index {index} out of range for size {size}")]
    IndexOutOfRange { what: &'static str, index: usize, size: usize },
    #[error("exhaustive search needs {pairs} subset pairs, above the limit of {limit}")]
    TooLarge { pairs: u128, limit: u128 },
}

/// Selected scores below this value are flagged as effectively zero.
pub const ZERO_SCORE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ranked {
    pub index: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    /// All samples by descending row norm of `W`.
    pub sample_ranking: Vec<Ranked>,
    /// All features by descending column norm of `W`.
    pub feature_ranking: Vec<Ranked>,
    pub m: usize,
    pub r: usize,
    pub selected_samples: Vec<usize>,
    pub selected_features: Vec<usize>,
    /// Set when a selected sample or feature has score below [`ZERO_SCORE`],
    /// i.e. the budget exceeds the sparsity pattern of `W`.
    pub below_sparsity: bool,
}

/// Indices ordered by descending score, ties by ascending index.
pub fn rank_desc(scores: &[f64]) -> Vec<Ranked> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.into_iter().map(|i| Ranked { index: i, score: scores[i] }).collect()
}

/// Ranks rows (samples) and columns (features) of the n×d matrix `w` by ℓ2 norm.
pub fn rank_and_select(w: &DMatrix<f64>, req: SelectionRequest) -> Result<SelectionResult, SelectionError> {
    let (n, d) = w.shape();
    req.validate(n, d)?;
    let row_scores: Vec<f64> = w.row_iter().map(|r| r.norm()).collect();
    let col_scores: Vec<f64> = w.column_iter().map(|c| c.norm()).collect();
    let sample_ranking = rank_desc(&row_scores);
    let feature_ranking = rank_desc(&col_scores);
    let selected_samples: Vec<usize> = sample_ranking[..req.m].iter().map(|r| r.index).collect();
    let selected_features: Vec<usize> = feature_ranking[..req.r].iter().map(|r| r.index).collect();
    let below_sparsity = sample_ranking[..req.m].iter().chain(&feature_ranking[..req.r]).any(|r| r.score < ZERO_SCORE);
    Ok(SelectionResult {
        sample_ranking,
        feature_ranking,
        m: req.m,
        r: req.r,
        selected_samples,
        selected_features,
        below_sparsity,
    })
}

fn check_indices(what: &'static str, idx: &[usize], size: usize) -> Result<(), SelectionError> {
    if idx.is_empty() {
        return Err(SelectionError::EmptyIndexSet(what));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= size) {
        return Err(SelectionError::IndexOutOfRange { what, index: bad, size });
    }
    Ok(())
}

/// `‖X − C·U*·R‖²_F` with `C = X[:, samples]`, `R = X[features, :]` and the
/// optimal core `U* = C⁺·X·R⁺`.
pub fn reconstruction_error(x: &DMatrix<f64>, samples: &[usize], features: &[usize]) -> Result<f64, SelectionError> {
    check_indices("sample", samples, x.ncols())?;
    check_indices("feature", features, x.nrows())?;
    let c = linalg::select_columns(x, samples);
    let r = linalg::select_rows(x, features);
    let u = linalg::pinv(&c)? * x * linalg::pinv(&r)?;
    Ok((x - c * u * r).norm_squared())
}

pub fn dataset_reconstruction_error(ds: &Dataset, samples: &[usize], features: &[usize]) -> Result<f64, SelectionError> {
    reconstruction_error(ds.matrix(), samples, features)
}

/// Upper bound on subset pairs enumerated by [`oracle_best_subsets`].
pub const ORACLE_LIMIT: u128 = 1_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// All k-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] != i + n - k) else {
            return out;
        };
        cur[i] += 1;
        for j in (i + 1)..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub samples: Vec<usize>,
    pub features: Vec<usize>,
    pub error: f64,
    pub pairs_evaluated: usize,
}

/// Exhaustive minimizer of the reconstruction error over all `m`-sample,
/// `r`-feature subset pairs. Ties go to the lexicographically first pair
/// (samples first, then features).
pub fn oracle_best_subsets(x: &DMatrix<f64>, req: SelectionRequest) -> Result<OracleResult, SelectionError> {
    let (d, n) = x.shape();
    req.validate(n, d)?;
    let pairs = binomial(n, req.m) * binomial(d, req.r);
    if pairs > ORACLE_LIMIT {
        return Err(SelectionError::TooLarge { pairs, limit: ORACLE_LIMIT });
    }
    let sample_sets = combinations(n, req.m);
    let feature_sets = combinations(d, req.r);
    // ‖X − CC⁺·X·R⁺R‖ only needs the two projectors
    let col_proj: Vec<DMatrix<f64>> = sample_sets
        .par_iter()
        .map(|s| {
            let c = linalg::select_columns(x, s);
            Ok(&c * linalg::pinv(&c)?)
        })
        .collect::<Result<_, LinalgError>>()?;
    let row_proj: Vec<DMatrix<f64>> = feature_sets
        .par_iter()
        .map(|f| {
            let r = linalg::select_rows(x, f);
            Ok(linalg::pinv(&r)? * &r)
        })
        .collect::<Result<_, LinalgError>>()?;
    let errors: Vec<f64> = (0..sample_sets.len() * feature_sets.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / feature_sets.len(), k % feature_sets.len());
            (x - &col_proj[i] * x * &row_proj[j]).norm_squared()
        })
        .collect();
    let mut best = 0;
    for (k, &e) in errors.iter().enumerate() {
        if e < errors[best] {
            best = k;
        }
    }
    let (i, j) = (best / feature_sets.len(), best % feature_sets.len());
    Ok(OracleResult {
        samples: sample_sets[i].clone(),
        features: feature_sets[j].clone(),
        error: errors[best],
        pairs_evaluated: errors.len(),
    })
}
