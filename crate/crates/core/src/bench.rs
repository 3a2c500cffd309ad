//! Evaluation protocol: a method selects samples (and optionally features)
//! from unlabeled training data, labels are revealed for the selected samples
//! only, and a nearest-neighbour classifier trained on them is scored on a
//! held-out test set.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::admm::{self, RegularizationParams, SolverConfig, SolverError};
use crate::baselines::{self, BaselineError, RcurConfig, SamplingMode};
use crate::data::{DataError, Dataset, SelectionRequest};
use crate::linalg::{self, LinalgError};
use crate::selection::{self, SelectionError};
use crate::DMatrix;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{0} has no labels")]
    Unlabeled(&'static str),
    #[error("training set is empty")]
    EmptyTraining,
    #[error("k = {k} neighbours requested from {n} training samples")]
    TooFewNeighbours { k: usize, n: usize },
    #[error("train has {train} features, test has {test}")]
    FeatureMismatch { train: usize, test: usize },
    #[error("invalid bench spec: {0}")]
    InvalidSpec(String),
    #[error("unknown method {0:?}; expected alfs, random, rcur or variance+<one of those>")]
    UnknownMethod(String),
    #[error("method {0} needs a feature budget")]
    MissingFeatureBudget(String),
    #[error("every grid point failed:\n{}", .0.join("\n"))]
    GridFailed(Vec<String>),
    #[error("label index {index} out of range for {n} samples")]
    LabelIndex { index: usize, n: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub predictions: Vec<String>,
    /// Present when the test set is labeled.
    pub accuracy: Option<f64>,
}

/// k-nearest-neighbour classification by Euclidean distance between sample
/// columns. Distance ties go to the lower training index; vote ties go to the
/// label that appears first in the training set.
pub fn knn_classify(train: &Dataset, test: &Dataset, k: usize) -> Result<Classification, BenchError> {
    let labels = train.labels().ok_or(BenchError::Unlabeled("training set"))?;
    let n = train.n_samples();
    if n == 0 {
        return Err(BenchError::EmptyTraining);
    }
    if k == 0 || k > n {
        return Err(BenchError::TooFewNeighbours { k, n });
    }
    if train.n_features() != test.n_features() {
        return Err(BenchError::FeatureMismatch { train: train.n_features(), test: test.n_features() });
    }
    let mut first_seen: HashMap<&str, usize> = HashMap::new();
    for (i, l) in labels.iter().enumerate() {
        first_seen.entry(l.as_str()).or_insert(i);
    }
    let (xtr, xte) = (train.matrix(), test.matrix());
    let predictions: Vec<String> = (0..test.n_samples())
        .into_par_iter()
        .map(|j| {
            let q = xte.column(j);
            let mut dist: Vec<(f64, usize)> = (0..n).map(|i| ((xtr.column(i) - q).norm_squared(), i)).collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes: HashMap<&str, usize> = HashMap::new();
            for &(_, i) in &dist[..k] {
                *votes.entry(labels[i].as_str()).or_default() += 1;
            }
            let best = votes
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(first_seen[b.0].cmp(&first_seen[a.0])))
                .map(|(l, _)| l)
                .expect("k >= 1");
            best.to_string()
        })
        .collect();
    let accuracy = test.labels().map(|truth| {
        let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
        hits as f64 / truth.len() as f64
    });
    Ok(Classification { predictions, accuracy })
}

/// Hands out training labels one sample at a time and records every request.
/// It is the only path from the bench to training labels.
pub struct LabelOracle<'a> {
    labels: &'a [String],
    revealed: Mutex<BTreeSet<usize>>,
}

impl<'a> LabelOracle<'a> {
    pub fn new(labels: &'a [String]) -> Self {
        LabelOracle { labels, revealed: Mutex::new(BTreeSet::new()) }
    }

    pub fn reveal(&self, idx: &[usize]) -> Result<Vec<String>, BenchError> {
        let n = self.labels.len();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(BenchError::LabelIndex { index: bad, n });
        }
        self.revealed.lock().expect("oracle lock").extend(idx.iter().copied());
        Ok(idx.iter().map(|&i| self.labels[i].clone()).collect())
    }

    /// Every index revealed so far, ascending.
    pub fn revealed(&self) -> Vec<usize> {
        self.revealed.lock().expect("oracle lock").iter().copied().collect()
    }
}

/// Sample budget with an optional feature budget. Without one, classification
/// uses every feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub samples: usize,
    pub features: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Picked {
    pub samples: Vec<usize>,
    pub features: Option<Vec<usize>>,
    /// Parameters chosen by grid search, if any.
    pub params: Option<RegularizationParams>,
}

/// A selection method. `data` never carries labels; a method that needs
/// labels must ask `oracle` for them.
pub trait Selector: Sync {
    fn name(&self) -> String;

    /// Methods that ignore the seed run once per curve instead of once per repeat.
    fn uses_seed(&self) -> bool {
        true
    }

    /// One pick per budget, in order.
    fn select(&self, data: &Dataset, budgets: &[Budget], seed: u64, oracle: &LabelOracle) -> Result<Vec<Picked>, BenchError>;
}

// features are drawn from a separate stream so that sample picks match
// `random_sampling(n, m, seed)` exactly
const FEATURE_STREAM: u64 = 0x5EED_F00D_CAFE_0001;

pub struct RandomSelector;

impl Selector for RandomSelector {
    fn name(&self) -> String {
        "random".into()
    }

    fn select(&self, data: &Dataset, budgets: &[Budget], seed: u64, _: &LabelOracle) -> Result<Vec<Picked>, BenchError> {
        budgets
            .iter()
            .map(|b| {
                let samples = baselines::random_sampling(data.n_samples(), b.samples, seed)?;
                let features = b
                    .features
                    .map(|r| baselines::random_sampling(data.n_features(), r, seed ^ FEATURE_STREAM))
                    .transpose()?;
                Ok(Picked { samples, features, params: None })
            })
            .collect()
    }
}

/// Leverage-score CUR in exact-count mode, so realized budgets match the request.
pub struct RcurSelector {
    pub eps: f64,
}

impl Default for RcurSelector {
    fn default() -> Self {
        RcurSelector { eps: 0.5 }
    }
}

impl Selector for RcurSelector {
    fn name(&self) -> String {
        "rcur".into()
    }

    fn select(&self, data: &Dataset, budgets: &[Budget], seed: u64, _: &LabelOracle) -> Result<Vec<Picked>, BenchError> {
        let x = data.matrix();
        let rank = linalg::numerical_rank(x)?;
        budgets
            .iter()
            .map(|b| {
                let r = b.features.unwrap_or(data.n_features());
                let cfg = RcurConfig {
                    k: b.samples.min(r).min(rank).max(1),
                    m: b.samples,
                    r,
                    eps: self.eps,
                    seed,
                    mode: SamplingMode::ExactCount,
                };
                let res = baselines::rcur(x, &cfg)?;
                Ok(Picked {
                    samples: res.column_indices,
                    features: b.features.map(|_| res.row_indices),
                    params: None,
                })
            })
            .collect()
    }
}

/// Features by largest variance, samples by the wrapped method.
pub struct VarianceSelector {
    pub sampler: Box<dyn Selector>,
}

impl Selector for VarianceSelector {
    fn name(&self) -> String {
        format!("variance+{}", self.sampler.name())
    }

    fn uses_seed(&self) -> bool {
        self.sampler.uses_seed()
    }

    fn select(&self, data: &Dataset, budgets: &[Budget], seed: u64, oracle: &LabelOracle) -> Result<Vec<Picked>, BenchError> {
        let sample_only: Vec<Budget> = budgets.iter().map(|b| Budget { samples: b.samples, features: None }).collect();
        let picks = self.sampler.select(data, &sample_only, seed, oracle)?;
        budgets
            .iter()
            .zip(picks)
            .map(|(b, p)| {
                let r = b.features.ok_or_else(|| BenchError::MissingFeatureBudget(self.name()))?;
                let features = baselines::variance_feature_select(data.matrix(), r)?;
                Ok(Picked { features: Some(features), ..p })
            })
            .collect()
    }
}

/// The convex selection method, with fixed parameters or tuned per budget.
pub struct AlfsSelector {
    pub params: RegularizationParams,
    pub solver: SolverConfig,
    pub grid: Option<GridSpec>,
    /// Neighbours used when scoring grid points on a validation split.
    pub validation_k: usize,
}

impl AlfsSelector {
    pub fn fixed(params: RegularizationParams, solver: SolverConfig) -> Self {
        AlfsSelector { params, solver, grid: None, validation_k: 1 }
    }
}

fn request(data: &Dataset, b: &Budget) -> SelectionRequest {
    SelectionRequest { m: b.samples, r: b.features.unwrap_or(data.n_features()) }
}

fn pick_from(w: &DMatrix<f64>, data: &Dataset, b: &Budget, params: Option<RegularizationParams>) -> Result<Picked, BenchError> {
    let sel = selection::rank_and_select(w, request(data, b))?;
    Ok(Picked {
        samples: sel.selected_samples,
        features: b.features.map(|_| sel.selected_features),
        params,
    })
}

impl Selector for AlfsSelector {
    fn name(&self) -> String {
        "alfs".into()
    }

    fn uses_seed(&self) -> bool {
        false
    }

    fn select(&self, data: &Dataset, budgets: &[Budget], _: u64, oracle: &LabelOracle) -> Result<Vec<Picked>, BenchError> {
        let Some(grid) = &self.grid else {
            let w = admm::solve(data, &self.params, &self.solver)?.w;
            return budgets.iter().map(|b| pick_from(&w, data, b, None)).collect();
        };
        let points = grid.points(&self.params);
        let solutions: Vec<Result<DMatrix<f64>, String>> = points
            .par_iter()
            .map(|p| admm::solve(data, p, &self.solver).map(|o| o.w).map_err(|e| e.to_string()))
            .collect();
        budgets
            .iter()
            .map(|b| {
                let outcome = grid_search_with(&points, |k, _| {
                    let w = solutions[k].as_ref().map_err(Clone::clone)?;
                    revealed_score(data, w, b, oracle, self.validation_k).map_err(|e| e.to_string())
                })?;
                let w = solutions[outcome.best_index].as_ref().expect("best point solved");
                pick_from(w, data, b, Some(outcome.best))
            })
            .collect()
    }
}

/// Revealed labeled sets at least this large are scored by held-out accuracy.
pub const VALIDATION_MIN: usize = 10;

/// Grid-point score for the selection `w` induces at budget `b`.
///
/// With at least [`VALIDATION_MIN`] selected samples, every fifth sample in
/// ranking order is held out (20%) and scored by nearest-neighbour accuracy
/// of a classifier trained on the rest. Smaller sets fall back to the
/// negative reconstruction error of the selection.
pub fn revealed_score(
    data: &Dataset,
    w: &DMatrix<f64>,
    b: &Budget,
    oracle: &LabelOracle,
    k: usize,
) -> Result<f64, BenchError> {
    let sel = selection::rank_and_select(w, request(data, b))?;
    let samples = &sel.selected_samples;
    if samples.len() < VALIDATION_MIN {
        return Ok(-selection::reconstruction_error(data.matrix(), samples, &sel.selected_features)?);
    }
    let (held, fit): (Vec<(usize, usize)>, Vec<(usize, usize)>) =
        samples.iter().copied().enumerate().partition(|(pos, _)| pos % 5 == 4);
    let held: Vec<usize> = held.into_iter().map(|(_, i)| i).collect();
    let fit: Vec<usize> = fit.into_iter().map(|(_, i)| i).collect();
    let mut train = data.select_samples(&fit)?.with_labels(oracle.reveal(&fit)?)?;
    let mut valid = data.select_samples(&held)?.with_labels(oracle.reveal(&held)?)?;
    if b.features.is_some() {
        train = train.select_features(&sel.selected_features)?;
        valid = valid.select_features(&sel.selected_features)?;
    }
    Ok(knn_classify(&train, &valid, k.min(fit.len()))?.accuracy.expect("validation set is labeled"))
}

/// Parameter grid. Points are enumerated alpha-major, then beta, then eta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub eta: Vec<f64>,
    /// Held fixed.
    pub gamma: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        let v = vec![0.1, 1.0, 10.0, 100.0];
        GridSpec { alpha: v.clone(), beta: v.clone(), eta: v, gamma: 1.0 }
    }
}

impl GridSpec {
    /// Grid points; fields not on the grid come from `base`.
    pub fn points(&self, base: &RegularizationParams) -> Vec<RegularizationParams> {
        let mut out = Vec::with_capacity(self.alpha.len() * self.beta.len() * self.eta.len());
        for &alpha in &self.alpha {
            for &beta in &self.beta {
                for &eta in &self.eta {
                    out.push(RegularizationParams { alpha, beta, eta, gamma: self.gamma, ..*base });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.alpha.is_empty() || self.beta.is_empty() || self.eta.is_empty() {
            return Err(BenchError::InvalidSpec("grid has an empty axis".into()));
        }
        for p in self.points(&RegularizationParams::default()) {
            p.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridOutcome {
    pub best: RegularizationParams,
    pub best_index: usize,
    pub best_score: f64,
    /// Score or failure message per point, in grid order.
    pub scores: Vec<Result<f64, String>>,
}

/// Evaluates `score(index, point)` at every point (higher is better) and
/// returns the best; ties go to the earliest point.
pub fn grid_search_with<F>(points: &[RegularizationParams], score: F) -> Result<GridOutcome, BenchError>
where
    F: Fn(usize, &RegularizationParams) -> Result<f64, String> + Sync,
{
    if points.is_empty() {
        return Err(BenchError::InvalidSpec("grid is empty".into()));
    }
    let scores: Vec<Result<f64, String>> = points
        .par_iter()
        .enumerate()
        .map(|(k, p)| match score(k, p) {
            Ok(s) if s.is_nan() => Err("score is NaN".to_string()),
            other => other,
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (k, s) in scores.iter().enumerate() {
        if let Ok(s) = *s {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((k, s));
            }
        }
    }
    let Some((best_index, best_score)) = best else {
        let diag = scores
            .iter()
            .zip(points)
            .map(|(s, p)| {
                format!("alpha={} beta={} eta={}: {}", p.alpha, p.beta, p.eta, s.as_ref().err().map_or("", |e| e))
            })
            .collect();
        return Err(BenchError::GridFailed(diag));
    };
    Ok(GridOutcome { best: points[best_index], best_index, best_score, scores })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningOutcome {
    pub outcome: GridOutcome,
    pub solver_invocations: usize,
}

/// Tunes the parameters for one budget on labeled training data with the
/// [`revealed_score`] protocol: one solver run per grid point.
pub fn grid_search(
    train: &Dataset,
    budget: Budget,
    grid: &GridSpec,
    base: &RegularizationParams,
    solver: &SolverConfig,
    k: usize,
) -> Result<TuningOutcome, BenchError> {
    grid.validate()?;
    let labels = train.labels().ok_or(BenchError::Unlabeled("training set"))?;
    let oracle = LabelOracle::new(labels);
    let data = train.unlabeled();
    let calls = AtomicUsize::new(0);
    let outcome = grid_search_with(&grid.points(base), |_, p| {
        calls.fetch_add(1, Ordering::Relaxed);
        let w = admm::solve(&data, p, solver).map_err(|e| e.to_string())?.w;
        revealed_score(&data, &w, &budget, &oracle, k).map_err(|e| e.to_string())
    })?;
    Ok(TuningOutcome { outcome, solver_invocations: calls.into_inner() })
}

/// Method identifier: `alfs`, `random`, `rcur`, or `variance+<sampler>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Method {
    pub sampler: Sampler,
    /// Select features by variance (requires a feature budget).
    pub variance_features: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sampler {
    Alfs,
    Random,
    Rcur,
}

impl Method {
    pub fn selector(&self, params: &RegularizationParams, solver: &SolverConfig, grid: Option<&GridSpec>) -> Box<dyn Selector> {
        let base: Box<dyn Selector> = match self.sampler {
            Sampler::Alfs => Box::new(AlfsSelector { grid: grid.cloned(), ..AlfsSelector::fixed(*params, *solver) }),
            Sampler::Random => Box::new(RandomSelector),
            Sampler::Rcur => Box::new(RcurSelector::default()),
        };
        if self.variance_features {
            Box::new(VarianceSelector { sampler: base })
        } else {
            base
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sampler {
            Sampler::Alfs => "alfs",
            Sampler::Random => "random",
            Sampler::Rcur => "rcur",
        };
        if self.variance_features {
            write!(f, "variance+{s}")
        } else {
            f.write_str(s)
        }
    }
}

impl FromStr for Method {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (variance_features, rest) = match s.strip_prefix("variance+") {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let sampler = match rest {
            "alfs" => Sampler::Alfs,
            "random" => Sampler::Random,
            "rcur" => Sampler::Rcur,
            _ => return Err(BenchError::UnknownMethod(s.to_string())),
        };
        Ok(Method { sampler, variance_features })
    }
}

impl TryFrom<String> for Method {
    type Error = BenchError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    Knn { k: usize },
}

impl Default for Classifier {
    fn default() -> Self {
        Classifier::Knn { k: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub method: Method,
    pub sample_budgets: Vec<usize>,
    /// Empty: classify in the full feature space. One value: fixed feature
    /// budget. Several: a feature sweep at a single sample budget.
    #[serde(default)]
    pub feature_budgets: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub classifier: Classifier,
    /// Tune ALFS parameters per budget instead of using fixed ones.
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

fn default_repeats() -> usize {
    10
}

impl BenchSpec {
    pub fn new(method: Method, sample_budgets: Vec<usize>, repeats: usize, seed: u64) -> Self {
        BenchSpec {
            method,
            sample_budgets,
            feature_budgets: Vec::new(),
            repeats,
            seed,
            classifier: Classifier::default(),
            grid: None,
        }
    }

    /// The budget points and the value reported on the curve's x axis for each.
    pub fn points(&self) -> Result<Vec<(usize, Budget)>, BenchError> {
        let (s, f) = (&self.sample_budgets, &self.feature_budgets);
        match (s.len(), f.len()) {
            (0, _) => Err(BenchError::InvalidSpec("no sample budgets".into())),
            (_, 0) => Ok(s.iter().map(|&m| (m, Budget { samples: m, features: None })).collect()),
            (_, 1) => Ok(s.iter().map(|&m| (m, Budget { samples: m, features: Some(f[0]) })).collect()),
            (1, _) => Ok(f.iter().map(|&r| (r, Budget { samples: s[0], features: Some(r) })).collect()),
            _ => Err(BenchError::InvalidSpec("sweep either sample budgets or feature budgets, not both".into())),
        }
    }

    pub fn validate(&self, n_train: usize, d: usize) -> Result<(), BenchError> {
        if self.repeats == 0 {
            return Err(BenchError::InvalidSpec("repeats must be >= 1".into()));
        }
        for (_, b) in self.points()? {
            if b.samples == 0 || b.samples > n_train {
                return Err(BenchError::InvalidSpec(format!("sample budget {} outside 1..={n_train}", b.samples)));
            }
            if let Some(r) = b.features {
                if r == 0 || r > d {
                    return Err(BenchError::InvalidSpec(format!("feature budget {r} outside 1..={d}")));
                }
            }
        }
        if self.method.variance_features && self.feature_budgets.is_empty() {
            return Err(BenchError::MissingFeatureBudget(self.method.to_string()));
        }
        let Classifier::Knn { k } = self.classifier;
        if k == 0 {
            return Err(BenchError::InvalidSpec("classifier k must be >= 1".into()));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub budget: usize,
    pub repeat: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyCurve {
    pub method: String,
    pub budgets: Vec<usize>,
    /// Mean over the repeats that succeeded; `None` if none did.
    pub mean: Vec<Option<f64>>,
    /// `accuracies[b][t]` for budget `b` and repeat `t`; `None` marks a failed cell.
    pub accuracies: Vec<Vec<Option<f64>>>,
    pub failures: Vec<CellFailure>,
}

impl AccuracyCurve {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn run_curve(
    train: &Dataset,
    test: &Dataset,
    spec: &BenchSpec,
    params: &RegularizationParams,
    solver: &SolverConfig,
) -> Result<AccuracyCurve, BenchError> {
    let selector = spec.method.selector(params, solver, spec.grid.as_ref());
    run_curve_with(train, test, spec, selector.as_ref())
}

/// Runs every (budget, repeat) cell. Repeat `t` uses seed `spec.seed + t`.
/// A failing cell is recorded in `failures`; the rest of the curve is kept.
pub fn run_curve_with(
    train: &Dataset,
    test: &Dataset,
    spec: &BenchSpec,
    selector: &dyn Selector,
) -> Result<AccuracyCurve, BenchError> {
    let labels = train.labels().ok_or(BenchError::Unlabeled("training set"))?;
    if test.labels().is_none() {
        return Err(BenchError::Unlabeled("test set"));
    }
    if train.n_features() != test.n_features() {
        return Err(BenchError::FeatureMismatch { train: train.n_features(), test: test.n_features() });
    }
    spec.validate(train.n_samples(), train.n_features())?;
    let points = spec.points()?;
    let budgets: Vec<Budget> = points.iter().map(|p| p.1).collect();
    let data = train.unlabeled();
    let oracle = LabelOracle::new(labels);
    let Classifier::Knn { k } = spec.classifier;

    let seed = |t: usize| spec.seed.wrapping_add(t as u64);
    let runs: Vec<Result<Vec<Picked>, String>> = if selector.uses_seed() {
        (0..spec.repeats)
            .into_par_iter()
            .map(|t| selector.select(&data, &budgets, seed(t), &oracle).map_err(|e| e.to_string()))
            .collect()
    } else {
        let once = selector.select(&data, &budgets, seed(0), &oracle).map_err(|e| e.to_string());
        vec![once; spec.repeats]
    };

    let cells: Vec<(usize, usize)> = (0..budgets.len()).flat_map(|b| (0..spec.repeats).map(move |t| (b, t))).collect();
    let results: Vec<Result<f64, String>> = cells
        .par_iter()
        .map(|&(b, t)| {
            let picks = runs[t].as_ref().map_err(Clone::clone)?;
            let pick = picks.get(b).ok_or("selector returned too few picks")?;
            cell_accuracy(&data, test, pick, &oracle, k).map_err(|e| e.to_string())
        })
        .collect();

    let mut accuracies = vec![vec![None; spec.repeats]; budgets.len()];
    let mut failures = Vec::new();
    for (&(b, t), r) in cells.iter().zip(results) {
        match r {
            Ok(a) => accuracies[b][t] = Some(a),
            Err(message) => failures.push(CellFailure { budget: points[b].0, repeat: t, message }),
        }
    }
    let mean = accuracies
        .iter()
        .map(|row| {
            let ok: Vec<f64> = row.iter().flatten().copied().collect();
            (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
        })
        .collect();
    Ok(AccuracyCurve {
        method: selector.name(),
        budgets: points.iter().map(|p| p.0).collect(),
        mean,
        accuracies,
        failures,
    })
}

fn cell_accuracy(data: &Dataset, test: &Dataset, pick: &Picked, oracle: &LabelOracle, k: usize) -> Result<f64, BenchError> {
    // classifier input does not depend on the order a method ranked samples in
    let mut samples = pick.samples.clone();
    samples.sort_unstable();
    let mut train = data.select_samples(&samples)?.with_labels(oracle.reveal(&samples)?)?;
    let mut test = test.clone();
    if let Some(f) = &pick.features {
        train = train.select_features(f)?;
        test = test.select_features(f)?;
    }
    let k = k.min(samples.len());
    Ok(knn_classify(&train, &test, k)?.accuracy.expect("test set is labeled"))
}

/// Writes `method,budget,repeat,accuracy` rows for every successful cell.
pub fn write_curves_csv<W: Write>(curves: &[AccuracyCurve], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| BenchError::Data(DataError::Csv(e));
    w.write_record(["method", "budget", "repeat", "accuracy"]).map_err(csv_err)?;
    for c in curves {
        for (b, row) in c.accuracies.iter().enumerate() {
            for (t, a) in row.iter().enumerate() {
                if let Some(a) = a {
                    w.write_record([c.method.clone(), c.budgets[b].to_string(), t.to_string(), a.to_string()])
                        .map_err(csv_err)?;
                }
            }
        }
    }
    w.flush().map_err(|e| BenchError::Data(DataError::Io { path: "<curves>".into(), source: e }))
}
