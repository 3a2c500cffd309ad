//! The selection objective and its ADMM solver.
//!
//! The problem
//!
//! ```text
//! min_W ‖X − XWX‖²_F + α‖W‖₂,₁ + β‖Wᵀ‖₂,₁ + γ‖W‖* + η‖T ⊙ (WX)‖₁
//! ```
//!
//! is split with `Z = WX` and `W̃ = W`. Each outer iteration runs
//! W-step (L-BFGS on a smoothed subproblem) → Z-step (weighted soft
//! thresholding) → W̃-step (singular value thresholding) → multiplier ascent
//! and penalty growth → convergence check. Convergence checks and reports
//! always use the exact, unsmoothed objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::lbfgs::{self, LbfgsConfig, LbfgsError, LineSearchFailure};
use crate::linalg::max_abs;
use crate::prox::{self, AngularWeights, ProxError, Threshold};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid regularization parameters: {0}")]
    InvalidParams(String),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error(transparent)]
    Lbfgs(#[from] LbfgsError),
    #[error("non-finite value in {what} at outer iteration {iter}")]
    NonFinite { what: &'static str, iter: usize, report: Box<ConvergenceReport> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizationParams {
    /// Row sparsity weight (sample selection).
    pub alpha: f64,
    /// Column sparsity weight (feature selection).
    pub beta: f64,
    /// Nuclear norm weight.
    pub gamma: f64,
    /// Weight of the angular locality term.
    pub eta: f64,
    /// Floor added to `|cos θ|` in the angular weights.
    pub varsigma: f64,
    /// `ε_s` in the smoothed row/column norms `√(‖w‖² + ε_s)` of the W-step.
    pub smoothing_eps: f64,
}

impl Default for RegularizationParams {
    fn default() -> Self {
        RegularizationParams {
            alpha: 1.0,
            beta: 1.0,
            gamma: 1.0,
            eta: 1.0,
            varsigma: prox::DEFAULT_VARSIGMA,
            smoothing_eps: 1e-8,
        }
    }
}

impl RegularizationParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let weights = [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma), ("eta", self.eta)];
        for (name, v) in weights {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(SolverError::InvalidParams(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.varsigma > 0.0) || !self.varsigma.is_finite() {
            return Err(SolverError::InvalidParams(format!("varsigma must be > 0, got {}", self.varsigma)));
        }
        if !(self.smoothing_eps > 0.0) || !self.smoothing_eps.is_finite() {
            return Err(SolverError::InvalidParams(format!("smoothing_eps must be > 0, got {}", self.smoothing_eps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub rho1_init: f64,
    pub rho2_init: f64,
    pub rho_max: f64,
    /// Penalty growth factor applied each iteration when `adaptive_rho` is set.
    pub tau: f64,
    pub epsilon: f64,
    pub max_outer_iters: usize,
    pub adaptive_rho: bool,
    /// Zero rows/columns of the returned W that the stationarity condition
    /// certifies as zero (see [`kkt_support`]).
    pub support_screening: bool,
    pub inner: LbfgsConfig,
    /// Echoed in reports. The solver starts from zeros and draws no random numbers.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho1_init: 1e-6,
            rho2_init: 1e-6,
            rho_max: 1e10,
            tau: 1.1,
            epsilon: 1e-3,
            max_outer_iters: 1000,
            adaptive_rho: true,
            support_screening: true,
            inner: LbfgsConfig::default(),
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let fin = |v: f64| v.is_finite();
        if !(self.rho1_init > 0.0 && self.rho2_init > 0.0 && fin(self.rho_max))
            || self.rho1_init > self.rho_max
            || self.rho2_init > self.rho_max
        {
            return Err(SolverError::InvalidConfig(format!(
                "need 0 < rho1_init, rho2_init <= rho_max, got {}, {}, {}",
                self.rho1_init, self.rho2_init, self.rho_max
            )));
        }
        if !(self.tau >= 1.0) || !fin(self.tau) {
            return Err(SolverError::InvalidConfig(format!("tau must be >= 1, got {}", self.tau)));
        }
        if !(self.epsilon > 0.0) || !fin(self.epsilon) {
            return Err(SolverError::InvalidConfig(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        self.inner.validate().map_err(|e| SolverError::InvalidConfig(e.to_string()))
    }
}

/// ADMM iterates. `w`, `w_tilde`, `lambda2` are n×d; `z`, `lambda1` are n×n.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub w: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub w_tilde: DMatrix<f64>,
    pub lambda1: DMatrix<f64>,
    pub lambda2: DMatrix<f64>,
    pub rho1: f64,
    pub rho2: f64,
    pub iter: usize,
}

impl SolverState {
    pub fn zeros(n_features: usize, n_samples: usize, rho1: f64, rho2: f64) -> Self {
        let (d, n) = (n_features, n_samples);
        SolverState {
            w: DMatrix::zeros(n, d),
            z: DMatrix::zeros(n, n),
            w_tilde: DMatrix::zeros(n, d),
            lambda1: DMatrix::zeros(n, n),
            lambda2: DMatrix::zeros(n, d),
            rho1,
            rho2,
            iter: 0,
        }
    }

    /// Blockwise difference `self − other`.
    pub fn delta(&self, other: &SolverState) -> StateDelta {
        StateDelta {
            w: &self.w - &other.w,
            z: &self.z - &other.z,
            w_tilde: &self.w_tilde - &other.w_tilde,
            lambda1: &self.lambda1 - &other.lambda1,
            lambda2: &self.lambda2 - &other.lambda2,
        }
    }

    fn check_shapes(&self, x: &DMatrix<f64>) -> Result<(), SolverError> {
        let (d, n) = x.shape();
        let ok = self.w.shape() == (n, d)
            && self.w_tilde.shape() == (n, d)
            && self.lambda2.shape() == (n, d)
            && self.z.shape() == (n, n)
            && self.lambda1.shape() == (n, n);
        if ok {
            Ok(())
        } else {
            Err(SolverError::Shape(format!("state does not match a {d}x{n} data matrix")))
        }
    }

    fn first_non_finite(&self) -> Option<&'static str> {
        let blocks = [
            ("W", &self.w),
            ("Z", &self.z),
            ("W~", &self.w_tilde),
            ("Lambda1", &self.lambda1),
            ("Lambda2", &self.lambda2),
        ];
        blocks.into_iter().find(|(_, m)| m.iter().any(|v| !v.is_finite())).map(|(n, _)| n)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDelta {
    pub w: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub w_tilde: DMatrix<f64>,
    pub lambda1: DMatrix<f64>,
    pub lambda2: DMatrix<f64>,
}

fn check_w_shape(x: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<(), SolverError> {
    if w.shape() != (x.ncols(), x.nrows()) {
        return Err(SolverError::Shape(format!(
            "W is {:?}, expected {:?} for a {:?} data matrix",
            w.shape(),
            (x.ncols(), x.nrows()),
            x.shape()
        )));
    }
    Ok(())
}

fn check_weights(x: &DMatrix<f64>, t: &AngularWeights) -> Result<(), SolverError> {
    let n = x.ncols();
    if t.t.shape() != (n, n) {
        return Err(SolverError::Shape(format!("weights are {:?}, expected ({n}, {n})", t.t.shape())));
    }
    Ok(())
}

fn weighted_l1(t: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    t.iter().zip(m.iter()).map(|(a, b)| (a * b).abs()).sum()
}

/// Exact objective value at `w`.
pub fn objective(
    x: &DMatrix<f64>,
    w: &DMatrix<f64>,
    params: &RegularizationParams,
    t: &AngularWeights,
) -> Result<f64, SolverError> {
    check_w_shape(x, w)?;
    check_weights(x, t)?;
    let wx = w * x;
    let fit = (x - x * &wx).norm_squared();
    let mut value = fit;
    if params.alpha != 0.0 {
        value += params.alpha * prox::l21_norm(w)?;
    }
    if params.beta != 0.0 {
        value += params.beta * prox::l21_norm(&w.transpose())?;
    }
    if params.gamma != 0.0 {
        value += params.gamma * prox::nuclear_norm(w)?;
    }
    if params.eta != 0.0 {
        value += params.eta * weighted_l1(&t.t, &wx);
    }
    if !value.is_finite() {
        return Err(SolverError::NonFinite {
            what: "objective",
            iter: 0,
            report: Box::new(ConvergenceReport::empty()),
        });
    }
    Ok(value)
}

/// Augmented Lagrangian of the split problem at `state`.
pub fn augmented_lagrangian(
    x: &DMatrix<f64>,
    state: &SolverState,
    params: &RegularizationParams,
    t: &AngularWeights,
) -> Result<f64, SolverError> {
    state.check_shapes(x)?;
    check_weights(x, t)?;
    let w = &state.w;
    let wx = w * x;
    let c1 = &wx - &state.z;
    let c2 = w - &state.w_tilde;
    Ok((x - x * &wx).norm_squared()
        + params.alpha * prox::l21_norm(w)?
        + params.beta * prox::l21_norm(&w.transpose())?
        + params.gamma * prox::nuclear_norm(&state.w_tilde)?
        + params.eta * weighted_l1(&t.t, &state.z)
        + state.lambda1.dot(&c1)
        + state.lambda2.dot(&c2)
        + 0.5 * state.rho1 * c1.norm_squared()
        + 0.5 * state.rho2 * c2.norm_squared())
}

/// Smoothed W-subproblem: value and gradient at `w` with the other blocks of
/// `state` held fixed.
fn w_subproblem_eval(
    x: &DMatrix<f64>,
    xt: &DMatrix<f64>,
    state: &SolverState,
    params: &RegularizationParams,
    w: &DMatrix<f64>,
) -> (f64, DMatrix<f64>) {
    let eps = params.smoothing_eps;
    let wx = w * x;
    let resid = x * &wx - x;
    let mut value = resid.norm_squared();
    let mut grad = xt * (&resid * xt) * 2.0;

    let a = &wx - &state.z + &state.lambda1 / state.rho1;
    value += 0.5 * state.rho1 * a.norm_squared();
    grad += (a * xt) * state.rho1;

    let b = w - &state.w_tilde + &state.lambda2 / state.rho2;
    value += 0.5 * state.rho2 * b.norm_squared();
    grad += b * state.rho2;

    if params.alpha != 0.0 {
        for i in 0..w.nrows() {
            let s = (w.row(i).norm_squared() + eps).sqrt();
            value += params.alpha * s;
            let scaled = w.row(i) * (params.alpha / s);
            let mut g = grad.row_mut(i);
            g += scaled;
        }
    }
    if params.beta != 0.0 {
        for j in 0..w.ncols() {
            let s = (w.column(j).norm_squared() + eps).sqrt();
            value += params.beta * s;
            let scaled = w.column(j) * (params.beta / s);
            let mut g = grad.column_mut(j);
            g += scaled;
        }
    }
    (value, grad)
}

/// Value of the smoothed W-subproblem at `w` (other blocks from `state`).
pub fn w_subproblem_objective(
    x: &DMatrix<f64>,
    state: &SolverState,
    params: &RegularizationParams,
    w: &DMatrix<f64>,
) -> Result<f64, SolverError> {
    state.check_shapes(x)?;
    check_w_shape(x, w)?;
    Ok(w_subproblem_eval(x, &x.transpose(), state, params, w).0)
}

/// Gradient of the smoothed W-subproblem at `state.w`:
/// `2Xᵀ(XWX−X)Xᵀ + ρ1(WX−Z+Λ1/ρ1)Xᵀ + ρ2(W−W̃+Λ2/ρ2) + α·G_row + β·G_col`.
pub fn w_subproblem_gradient(
    x: &DMatrix<f64>,
    state: &SolverState,
    params: &RegularizationParams,
) -> Result<DMatrix<f64>, SolverError> {
    state.check_shapes(x)?;
    if !(params.smoothing_eps > 0.0) {
        return Err(SolverError::InvalidParams("smoothing_eps must be > 0".into()));
    }
    Ok(w_subproblem_eval(x, &x.transpose(), state, params, &state.w).1)
}

/// How the inner L-BFGS solve of one W-step ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStatus {
    Converged,
    MaxIters,
    LineSearchFailed,
}

#[derive(Debug, Clone)]
pub struct WStep {
    pub w: DMatrix<f64>,
    pub status: InnerStatus,
    pub iterations: usize,
    /// Smoothed subproblem value at the warm start and at the result.
    pub start_value: f64,
    pub final_value: f64,
}

/// W-step: L-BFGS on the smoothed subproblem, warm-started at `state.w`.
///
/// A line-search failure is not an error: the last accepted iterate is
/// returned with [`InnerStatus::LineSearchFailed`].
pub fn solve_w_subproblem(
    x: &DMatrix<f64>,
    state: &SolverState,
    params: &RegularizationParams,
    inner: &LbfgsConfig,
) -> Result<WStep, SolverError> {
    state.check_shapes(x)?;
    let xt = x.transpose();
    let (n, d) = state.w.shape();
    let obj = |v: &DVector<f64>| {
        let w = DMatrix::from_column_slice(n, d, v.as_slice());
        let (f, g) = w_subproblem_eval(x, &xt, state, params, &w);
        (f, DVector::from_column_slice(g.as_slice()))
    };
    let x0 = DVector::from_column_slice(state.w.as_slice());
    let (res, status) = match lbfgs::minimize(&obj, x0, inner) {
        Ok(r) => {
            let s = if r.converged { InnerStatus::Converged } else { InnerStatus::MaxIters };
            (r, s)
        }
        Err(LbfgsError::LineSearch { reason: LineSearchFailure::NotDescent | LineSearchFailure::Exhausted, last }) => {
            (*last, InnerStatus::LineSearchFailed)
        }
        Err(e) => return Err(e.into()),
    };
    Ok(WStep {
        w: DMatrix::from_column_slice(n, d, res.x.as_slice()),
        status,
        iterations: res.iterations,
        start_value: res.trace[0],
        final_value: res.f,
    })
}

/// Rows and columns zeroed by [`kkt_support`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Screened {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

/// Support identification at termination from the Lagrangian stationarity
/// condition `0 ∈ ∇f(W) + Λ1·Xᵀ + Λ2 + α∂‖W‖₂,₁ + β∂‖Wᵀ‖₂,₁`, where the
/// multipliers stand in for subgradients of the nuclear and angular terms.
///
/// The smoothed W-step leaves rows the exact problem sets to zero at a norm of
/// order `√ε_s`. Row `i` may be zero iff
/// `‖∇ᵢf(W with row i zeroed) + (Λ1·Xᵀ)ᵢ + (Λ2)ᵢ‖ ≤ α`; columns likewise
/// with `β`. Rows are tested in ascending order, then columns, each against
/// the gradient with earlier zeroings applied.
pub fn kkt_support(
    x: &DMatrix<f64>,
    state: &SolverState,
    params: &RegularizationParams,
) -> Result<(DMatrix<f64>, Screened), SolverError> {
    state.check_shapes(x)?;
    let mut w = state.w.clone();
    let mut screened = Screened::default();
    if params.alpha == 0.0 && params.beta == 0.0 {
        return Ok((w, screened));
    }
    let xt = x.transpose();
    let gram = &xt * x;
    let sxx = x * &xt;
    let mut grad = &xt * ((x * (&w * x) - x) * &xt) * 2.0 + &state.lambda1 * &xt + &state.lambda2;
    // zeroing a block E changes the gradient by −2·XᵀX·E·XXᵀ
    if params.alpha > 0.0 {
        for i in 0..w.nrows() {
            let wi_s = w.row(i) * &sxx;
            if w.row(i).iter().all(|&v| v == 0.0) {
                continue;
            }
            let g0 = grad.row(i) - &wi_s * (2.0 * gram[(i, i)]);
            if g0.norm() <= params.alpha {
                grad -= gram.column(i) * &wi_s * 2.0;
                w.row_mut(i).fill(0.0);
                screened.rows.push(i);
            }
        }
    }
    if params.beta > 0.0 {
        for j in 0..w.ncols() {
            if w.column(j).iter().all(|&v| v == 0.0) {
                continue;
            }
            let gw = &gram * w.column(j) * 2.0;
            let g0 = grad.column(j) - &gw * sxx[(j, j)];
            if g0.norm() <= params.beta {
                grad -= &gw * sxx.row(j);
                w.column_mut(j).fill(0.0);
                screened.cols.push(j);
            }
        }
    }
    Ok((w, screened))
}

/// Z-step: `soft_threshold(WX + Λ1/ρ1, η·T/ρ1)`.
pub fn update_z(
    x: &DMatrix<f64>,
    state: &SolverState,
    t: &AngularWeights,
    eta: f64,
) -> Result<DMatrix<f64>, SolverError> {
    state.check_shapes(x)?;
    check_weights(x, t)?;
    if !(state.rho1 > 0.0) {
        return Err(SolverError::InvalidConfig("rho1 must be > 0".into()));
    }
    let k = &state.w * x + &state.lambda1 / state.rho1;
    let mu = &t.t * (eta / state.rho1);
    Ok(prox::soft_threshold(&k, Threshold::Entrywise(&mu))?)
}

/// W̃-step: `svt(W + Λ2/ρ2, γ/ρ2)`.
pub fn update_w_tilde(state: &SolverState, gamma: f64) -> Result<DMatrix<f64>, SolverError> {
    if !(state.rho2 > 0.0) {
        return Err(SolverError::InvalidConfig("rho2 must be > 0".into()));
    }
    let k = &state.w + &state.lambda2 / state.rho2;
    Ok(prox::svt(&k, gamma / state.rho2)?)
}

/// Multiplier ascent followed by the penalty schedule.
pub fn update_duals_and_rho(x: &DMatrix<f64>, mut state: SolverState, cfg: &SolverConfig) -> SolverState {
    let c1 = &state.w * x - &state.z;
    let c2 = &state.w - &state.w_tilde;
    state.lambda1 += c1 * state.rho1;
    state.lambda2 += c2 * state.rho2;
    if cfg.adaptive_rho {
        state.rho1 = (cfg.tau * state.rho1).min(cfg.rho_max);
        state.rho2 = (cfg.tau * state.rho2).min(cfg.rho_max);
    }
    state
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceCheck {
    pub converged: bool,
    /// `‖WX − Z‖∞` (largest absolute entry).
    pub residual_wx: f64,
    /// `‖W − W̃‖∞` (largest absolute entry).
    pub residual_w: f64,
    /// `|f_k − f_{k−1}| / |f_{k−1}|`; `None` on the first iteration.
    pub relative_change: Option<f64>,
}

pub fn relative_change(prev: f64, curr: f64) -> f64 {
    if prev == 0.0 {
        if curr == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        ((curr - prev) / prev).abs()
    }
}

/// All three stopping conditions at tolerance `epsilon`.
/// Without a previous objective the check never passes.
pub fn check_convergence(
    x: &DMatrix<f64>,
    state: &SolverState,
    prev_objective: Option<f64>,
    curr_objective: f64,
    epsilon: f64,
) -> ConvergenceCheck {
    let residual_wx = max_abs(&(&state.w * x - &state.z));
    let residual_w = max_abs(&(&state.w - &state.w_tilde));
    let rel = prev_objective.map(|p| relative_change(p, curr_objective));
    let converged = residual_wx < epsilon && residual_w < epsilon && rel.is_some_and(|r| r < epsilon);
    ConvergenceCheck { converged, residual_wx, residual_w, relative_change: rel }
}

/// `‖Δ‖²_H = ρ1‖ΔW·X‖² + ρ2‖ΔW‖² + ρ1‖ΔZ‖² + ρ2‖ΔW̃‖² + ‖ΔΛ1‖²/ρ1 + ‖ΔΛ2‖²/ρ2`.
pub fn h_seminorm_sq(delta: &StateDelta, x: &DMatrix<f64>, rho1: f64, rho2: f64) -> f64 {
    rho1 * (&delta.w * x).norm_squared()
        + rho2 * delta.w.norm_squared()
        + rho1 * delta.z.norm_squared()
        + rho2 * delta.w_tilde.norm_squared()
        + delta.lambda1.norm_squared() / rho1
        + delta.lambda2.norm_squared() / rho2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub residual_wx: f64,
    pub residual_w: f64,
    pub relative_change: Option<f64>,
    /// `‖Σᵏ⁻¹ − Σᵏ‖²_H` with the penalties used during this iteration.
    pub h_seminorm_sq: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub inner_iterations: usize,
    pub inner_status: InnerStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub inner_line_search_failures: usize,
}

impl ConvergenceReport {
    fn empty() -> Self {
        ConvergenceReport { records: Vec::new(), stop_reason: StopReason::MaxIters, inner_line_search_failures: 0 }
    }

    pub fn final_record(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn objective_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.objective).collect()
    }

    pub fn h_seminorm_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.h_seminorm_sq).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    /// Final `W`, after [`kkt_support`] when screening is enabled.
    pub w: DMatrix<f64>,
    /// Final iterates as produced by the loop.
    pub state: SolverState,
    pub report: ConvergenceReport,
    pub screened: Screened,
}

pub fn solve(ds: &Dataset, params: &RegularizationParams, cfg: &SolverConfig) -> Result<SolveOutput, SolverError> {
    solve_matrix(ds.matrix(), params, cfg)
}

/// Runs the ADMM loop from the all-zero state.
pub fn solve_matrix(
    x: &DMatrix<f64>,
    params: &RegularizationParams,
    cfg: &SolverConfig,
) -> Result<SolveOutput, SolverError> {
    params.validate()?;
    cfg.validate()?;
    let t = prox::angular_weights(x, params.varsigma)?;
    let (d, n) = x.shape();
    let mut state = SolverState::zeros(d, n, cfg.rho1_init, cfg.rho2_init);
    let mut report = ConvergenceReport::empty();
    let mut prev_objective: Option<f64> = None;

    for _ in 0..cfg.max_outer_iters {
        let previous = state.clone();
        let (rho1, rho2) = (state.rho1, state.rho2);

        let step = solve_w_subproblem(x, &state, params, &cfg.inner)?;
        if step.status == InnerStatus::LineSearchFailed {
            report.inner_line_search_failures += 1;
        }
        state.w = step.w;
        state.z = update_z(x, &state, &t, params.eta)?;
        state.w_tilde = update_w_tilde(&state, params.gamma)?;
        state = update_duals_and_rho(x, state, cfg);
        state.iter += 1;

        if let Some(what) = state.first_non_finite() {
            return Err(SolverError::NonFinite { what, iter: state.iter, report: Box::new(report) });
        }
        let obj = match objective(x, &state.w, params, &t) {
            Ok(v) => v,
            Err(SolverError::NonFinite { .. }) => {
                return Err(SolverError::NonFinite { what: "objective", iter: state.iter, report: Box::new(report) })
            }
            Err(e) => return Err(e),
        };
        let check = check_convergence(x, &state, prev_objective, obj, cfg.epsilon);
        // `previous` and `state` carry different penalties only in adaptive mode
        let h = h_seminorm_sq(&previous.delta(&state), x, rho1, rho2);
        report.records.push(IterationRecord {
            iter: state.iter,
            objective: obj,
            residual_wx: check.residual_wx,
            residual_w: check.residual_w,
            relative_change: check.relative_change,
            h_seminorm_sq: h,
            rho1,
            rho2,
            inner_iterations: step.iterations,
            inner_status: step.status,
        });
        prev_objective = Some(obj);
        if check.converged {
            report.stop_reason = StopReason::Converged;
            break;
        }
    }
    let (w, screened) = if cfg.support_screening {
        kkt_support(x, &state, params)?
    } else {
        (state.w.clone(), Screened::default())
    };
    Ok(SolveOutput { w, state, report, screened })
}
