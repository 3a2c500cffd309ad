//! Joint unsupervised sample and feature selection.
//!
//! A data matrix `X` (features × samples) is approximated by the
//! self-representation `X ≈ X·W·X`, where row sparsity of `W` picks
//! representative samples and column sparsity picks representative features.
//! The convex objective
//!
//! ```text
//! ‖X − XWX‖²_F + α‖W‖₂,₁ + β‖Wᵀ‖₂,₁ + γ‖W‖* + η‖T ⊙ (WX)‖₁
//! ```
//!
//! is minimized with a two-block ADMM whose `W` step is solved by L-BFGS and
//! whose auxiliary steps are closed-form proximal maps.
//!
//! Modules:
//! - [`data`]: dataset ingestion, validation and splitting.
//! - [`prox`]: norms, shrinkage operators and angular weights.
//! - [`lbfgs`]: limited-memory BFGS with a Wolfe line search.
//! - [`admm`]: the objective, subproblem updates and the outer loop.
//! - [`selection`]: ranking, CUR reconstruction error and an exhaustive oracle.
//! - [`baselines`]: random sampling, variance features and leverage-score CUR.
//! - [`bench`]: nearest-neighbour evaluation, accuracy curves and grid search.

pub mod admm;
pub mod baselines;
pub mod bench;
pub mod data;
pub mod lbfgs;
pub mod linalg;
pub mod prox;
pub mod selection;

pub use nalgebra::{DMatrix, DVector};

pub use admm::{
    ConvergenceReport, RegularizationParams, SolveOutput, SolverConfig, SolverError, SolverState,
    StopReason,
};
pub use data::{Dataset, LoadOptions, Orientation, SelectionRequest, SplitSpec};
pub use lbfgs::LbfgsConfig;
pub use selection::SelectionResult;
