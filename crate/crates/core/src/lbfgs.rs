//! Limited-memory BFGS with a strong Wolfe line search.
//!
//! The iteration follows the sign convention `x_{k+1} = x_k − α_k·d_k` where
//! `d_k = H_k·∇f(x_k)` comes from the two-loop recursion over the stored
//! curvature pairs. Variables are flat vectors; matrix-valued problems are
//! reshaped by the caller.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbfgsConfig {
    /// Number of curvature pairs kept; 0 degenerates to gradient descent.
    pub history_size: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Scale of `H0 = s·I` used while the history is empty.
    pub initial_scaling: f64,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        LbfgsConfig { history_size: 10, c1: 1e-4, c2: 0.9, max_iters: 100, grad_tol: 1e-6, initial_scaling: 1.0 }
    }
}

impl LbfgsConfig {
    pub fn validate(&self) -> Result<(), LbfgsError> {
        let ok = self.c1 > 0.0
            && self.c1 < self.c2
            && self.c2 < 1.0
            && self.grad_tol >= 0.0
            && self.grad_tol.is_finite()
            && self.initial_scaling > 0.0
            && self.initial_scaling.is_finite();
        if ok {
            Ok(())
        } else {
            Err(LbfgsError::InvalidConfig(format!(
                "need 0 < c1 < c2 < 1, grad_tol >= 0, initial_scaling > 0; got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineSearchFailure {
    /// `⟨d, ∇f(x)⟩ ≤ 0`, so `x − αd` is not a descent path.
    NotDescent,
    /// The objective or gradient was non-finite at the starting point.
    NonFinite,
    /// No step satisfying both conditions within the evaluation budget, or the
    /// bracket collapsed below floating-point resolution.
    Exhausted,
}

#[derive(Debug, Error)]
pub enum LbfgsError {
    #[error("invalid L-BFGS configuration: {0}")]
    InvalidConfig(String),
    #[error("gradient has a non-finite entry")]
    NonFiniteGradient,
    #[error("objective or gradient is non-finite at the starting point")]
    NonFiniteStart,
    #[error("line search failed ({reason:?}) at iteration {}", last.iterations)]
    LineSearch { reason: LineSearchFailure, last: Box<LbfgsResult> },
}

/// A stored pair `s = x_{k+1} − x_k`, `y = ∇f_{k+1} − ∇f_k` with `⟨y, s⟩ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvaturePair {
    s: DVector<f64>,
    y: DVector<f64>,
    rho: f64,
}

impl CurvaturePair {
    /// Returns `None` when `⟨y, s⟩ ≤ 1e-12·‖y‖‖s‖`; such pairs would break positive definiteness.
    pub fn new(s: DVector<f64>, y: DVector<f64>) -> Option<Self> {
        let ys = y.dot(&s);
        if !(ys > 1e-12 * y.norm() * s.norm()) || !ys.is_finite() {
            return None;
        }
        Some(CurvaturePair { rho: 1.0 / ys, s, y })
    }

    pub fn s(&self) -> &DVector<f64> {
        &self.s
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// `⟨s, y⟩ / ⟨y, y⟩`, the usual choice of initial scaling after this pair.
    pub fn scaling(&self) -> f64 {
        1.0 / (self.rho * self.y.norm_squared())
    }
}

/// `H·grad` for the implicit inverse-Hessian estimate built from `history`
/// (ordered oldest first) on top of `H0 = initial_scaling·I`.
pub fn two_loop_direction(
    grad: &DVector<f64>,
    history: &[CurvaturePair],
    initial_scaling: f64,
) -> Result<DVector<f64>, LbfgsError> {
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(LbfgsError::NonFiniteGradient);
    }
    let mut q = grad.clone();
    let mut a = vec![0.0; history.len()];
    for (i, p) in history.iter().enumerate().rev() {
        a[i] = p.rho * p.s.dot(&q);
        q.axpy(-a[i], &p.y, 1.0);
    }
    q *= initial_scaling;
    for (i, p) in history.iter().enumerate() {
        let b = p.rho * p.y.dot(&q);
        q.axpy(a[i] - b, &p.s, 1.0);
    }
    Ok(q)
}

/// Something that can report `f(x)` and `∇f(x)` together.
pub trait Objective {
    fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>);
}

impl<F> Objective for F
where
    F: Fn(&DVector<f64>) -> (f64, DVector<f64>),
{
    fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        self(x)
    }
}

/// Adapts separate value and gradient evaluators.
pub struct Separate<F, G>(pub F, pub G);

impl<F, G> Objective for Separate<F, G>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    fn eval(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        ((self.0)(x), (self.1)(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
    pub initial_step: f64,
    pub max_evals: usize,
}

impl Default for WolfeParams {
    fn default() -> Self {
        WolfeParams { c1: 1e-4, c2: 0.9, initial_step: 1.0, max_evals: 60 }
    }
}

/// Accepted step with the point it leads to.
#[derive(Debug, Clone)]
pub struct WolfeStep {
    pub alpha: f64,
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub evals: usize,
}

/// Finds `α > 0` for the step `x − αd` meeting the strong Wolfe conditions
/// (which imply the weak ones):
/// `f(x−αd) ≤ f(x) − c1·α·⟨∇f(x), d⟩` and `|⟨∇f(x−αd), d⟩| ≤ c2·⟨∇f(x), d⟩`.
pub fn wolfe_search<O: Objective + ?Sized>(
    obj: &O,
    x: &DVector<f64>,
    d: &DVector<f64>,
    params: &WolfeParams,
) -> Result<WolfeStep, LineSearchFailure> {
    let (f0, g0) = obj.eval(x);
    if !f0.is_finite() || g0.iter().any(|v| !v.is_finite()) {
        return Err(LineSearchFailure::NonFinite);
    }
    search_from(obj, x, f0, &g0, d, params)
}

#[derive(Clone)]
struct Probe {
    alpha: f64,
    phi: f64,
    dphi: f64,
}

fn search_from<O: Objective + ?Sized>(
    obj: &O,
    x: &DVector<f64>,
    f0: f64,
    g0: &DVector<f64>,
    d: &DVector<f64>,
    params: &WolfeParams,
) -> Result<WolfeStep, LineSearchFailure> {
    // phi(a) = f(x − a·d), phi'(a) = −⟨∇f(x − a·d), d⟩
    let dphi0 = -g0.dot(d);
    if !(dphi0 < 0.0) {
        return Err(LineSearchFailure::NotDescent);
    }
    let WolfeParams { c1, c2, initial_step, max_evals } = *params;
    let mut evals = 0usize;
    let probe = |alpha: f64| {
        let xa = x - d * alpha;
        let (f, g) = obj.eval(&xa);
        let dphi = -g.dot(d);
        (xa, f, g, dphi)
    };
    let armijo = |alpha: f64, phi: f64| phi <= f0 + c1 * alpha * dphi0;
    let curvature = |dphi: f64| dphi.abs() <= -c2 * dphi0;

    let mut prev = Probe { alpha: 0.0, phi: f0, dphi: dphi0 };
    let mut alpha = initial_step;
    let mut bracket: Option<(Probe, Probe)> = None;

    while evals < max_evals {
        let (xa, phi, g, dphi) = probe(alpha);
        evals += 1;
        let finite = phi.is_finite() && dphi.is_finite();
        let cur = Probe { alpha, phi: if finite { phi } else { f64::INFINITY }, dphi: if finite { dphi } else { f64::NAN } };
        if !finite || !armijo(alpha, phi) || (evals > 1 && phi >= prev.phi) {
            bracket = Some((prev, cur));
            break;
        }
        if curvature(dphi) {
            return Ok(WolfeStep { alpha, x: xa, f: phi, grad: g, evals });
        }
        if dphi >= 0.0 {
            bracket = Some((cur, prev));
            break;
        }
        prev = cur;
        alpha *= 2.0;
        if !alpha.is_finite() {
            return Err(LineSearchFailure::Exhausted);
        }
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Err(LineSearchFailure::Exhausted);
    };

    while evals < max_evals {
        let width = (hi.alpha - lo.alpha).abs();
        if width <= f64::EPSILON * lo.alpha.max(hi.alpha) || width == 0.0 {
            return Err(LineSearchFailure::Exhausted);
        }
        let alpha = interpolate(&lo, &hi);
        let (xa, phi, g, dphi) = probe(alpha);
        evals += 1;
        let finite = phi.is_finite() && dphi.is_finite();
        if !finite || !armijo(alpha, phi) || phi >= lo.phi {
            hi = Probe { alpha, phi: if finite { phi } else { f64::INFINITY }, dphi: if finite { dphi } else { f64::NAN } };
            continue;
        }
        if curvature(dphi) {
            return Ok(WolfeStep { alpha, x: xa, f: phi, grad: g, evals });
        }
        let cur = Probe { alpha, phi, dphi };
        if dphi * (hi.alpha - lo.alpha) >= 0.0 {
            hi = lo;
        }
        lo = cur;
    }
    Err(LineSearchFailure::Exhausted)
}

/// Cubic interpolation between the bracket ends, safeguarded to the middle 80%
/// of the interval; falls back to bisection.
fn interpolate(lo: &Probe, hi: &Probe) -> f64 {
    let (a, b) = (lo.alpha, hi.alpha);
    let mid = 0.5 * (a + b);
    if !hi.phi.is_finite() || !hi.dphi.is_finite() {
        return mid;
    }
    let d1 = lo.dphi + hi.dphi - 3.0 * (lo.phi - hi.phi) / (a - b);
    let disc = d1 * d1 - lo.dphi * hi.dphi;
    if disc < 0.0 {
        return mid;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
    let (left, right) = (a.min(b), a.max(b));
    let margin = 0.1 * (right - left);
    if t.is_finite() && t >= left + margin && t <= right - margin {
        t
    } else {
        mid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    /// Objective at `x0` followed by the objective at every accepted iterate.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Minimizes `obj` from `x0`.
///
/// Stops when `‖∇f‖₂ ≤ grad_tol` (converged) or after `max_iters` iterations.
/// A failed line search returns [`LbfgsError::LineSearch`] carrying the last
/// accepted iterate.
pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: DVector<f64>, cfg: &LbfgsConfig) -> Result<LbfgsResult, LbfgsError> {
    cfg.validate()?;
    let (mut f, mut g) = obj.eval(&x0);
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(LbfgsError::NonFiniteStart);
    }
    let mut state = LbfgsResult {
        x: x0,
        f,
        grad_norm: g.norm(),
        iterations: 0,
        evaluations: 1,
        trace: vec![f],
        converged: false,
    };
    let mut history: Vec<CurvaturePair> = Vec::with_capacity(cfg.history_size);
    let wolfe = |step: f64| WolfeParams { c1: cfg.c1, c2: cfg.c2, initial_step: step, ..WolfeParams::default() };

    loop {
        if state.grad_norm <= cfg.grad_tol {
            state.converged = true;
            return Ok(state);
        }
        if state.iterations >= cfg.max_iters {
            return Ok(state);
        }
        let scaling = history.last().map_or(cfg.initial_scaling, CurvaturePair::scaling);
        let d = two_loop_direction(&g, &history, scaling)?;
        // without curvature information the direction is only a scaled gradient
        let step0 = if history.is_empty() { (1.0 / d.norm()).min(1.0) } else { 1.0 };
        let step = match search_from(obj, &state.x, f, &g, &d, &wolfe(step0)) {
            Ok(s) => s,
            Err(reason) => return Err(LbfgsError::LineSearch { reason, last: Box::new(state) }),
        };
        state.evaluations += step.evals;
        if cfg.history_size > 0 {
            if let Some(pair) = CurvaturePair::new(&step.x - &state.x, &step.grad - &g) {
                if history.len() == cfg.history_size {
                    history.remove(0);
                }
                history.push(pair);
            }
        }
        state.x = step.x;
        f = step.f;
        g = step.grad;
        state.f = f;
        state.grad_norm = g.norm();
        state.iterations += 1;
        state.trace.push(f);
    }
}
