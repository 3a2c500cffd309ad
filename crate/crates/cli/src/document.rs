use alfs_core::admm::{SolveOutput, StopReason};
use alfs_core::selection::{OracleResult, Ranked, SelectionResult};
use alfs_core::{Dataset, SelectionRequest};
use serde::Serialize;

use crate::RunConfig;

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualTraces {
    /// `‖Z − WX‖∞` per outer iteration.
    pub wx: Vec<f64>,
    /// `‖W − W̃‖∞` per outer iteration.
    pub w: Vec<f64>,
}

/// Output of `solve`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultDocument {
    pub selected_samples: Vec<usize>,
    pub selected_features: Vec<usize>,
    /// Row norm of `W` for every sample, in sample order.
    pub sample_scores: Vec<f64>,
    /// Column norm of `W` for every feature, in feature order.
    pub feature_scores: Vec<f64>,
    pub below_sparsity: bool,
    pub objective_trace: Vec<f64>,
    pub residual_traces: ResidualTraces,
    pub h_seminorm_trace: Vec<f64>,
    pub stop_reason: StopReason,
    pub iterations: usize,
    /// Samples and features zeroed by the support test at termination.
    pub screened_samples: Vec<usize>,
    pub screened_features: Vec<usize>,
    /// `null` unless `--record-time` was given, which keeps reruns byte-identical.
    pub wall_time_seconds: Option<f64>,
    pub config_echo: RunConfig,
    pub tool_version: String,
}

fn by_index(ranking: &[Ranked]) -> Vec<f64> {
    let mut scores = vec![0.0; ranking.len()];
    for r in ranking {
        scores[r.index] = r.score;
    }
    scores
}

impl ResultDocument {
    pub fn new(out: &SolveOutput, sel: &SelectionResult, cfg: &RunConfig) -> Self {
        let records = &out.report.records;
        ResultDocument {
            selected_samples: sel.selected_samples.clone(),
            selected_features: sel.selected_features.clone(),
            sample_scores: by_index(&sel.sample_ranking),
            feature_scores: by_index(&sel.feature_ranking),
            below_sparsity: sel.below_sparsity,
            objective_trace: out.report.objective_trace(),
            residual_traces: ResidualTraces {
                wx: records.iter().map(|r| r.residual_wx).collect(),
                w: records.iter().map(|r| r.residual_w).collect(),
            },
            h_seminorm_trace: out.report.h_seminorm_trace(),
            stop_reason: out.report.stop_reason,
            iterations: records.len(),
            screened_samples: out.screened.rows.clone(),
            screened_features: out.screened.cols.clone(),
            wall_time_seconds: None,
            config_echo: cfg.clone(),
            tool_version: TOOL_VERSION.into(),
        }
    }
}

/// Output of `select`: the selection without solver traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectDocument {
    pub selected_samples: Vec<usize>,
    pub selected_features: Vec<usize>,
    pub sample_scores: Vec<f64>,
    pub feature_scores: Vec<f64>,
    pub below_sparsity: bool,
    pub stop_reason: StopReason,
    pub wall_time_seconds: Option<f64>,
    pub config_echo: RunConfig,
    pub tool_version: String,
}

impl From<ResultDocument> for SelectDocument {
    fn from(d: ResultDocument) -> Self {
        SelectDocument {
            selected_samples: d.selected_samples,
            selected_features: d.selected_features,
            sample_scores: d.sample_scores,
            feature_scores: d.feature_scores,
            below_sparsity: d.below_sparsity,
            stop_reason: d.stop_reason,
            wall_time_seconds: d.wall_time_seconds,
            config_echo: d.config_echo,
            tool_version: d.tool_version,
        }
    }
}

/// Output of `oracle`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleDocument {
    pub data: String,
    pub m: usize,
    pub r: usize,
    pub samples: Vec<usize>,
    pub features: Vec<usize>,
    pub error: f64,
    pub pairs_evaluated: usize,
    pub tool_version: String,
}

impl OracleDocument {
    pub fn new(ds: &Dataset, req: SelectionRequest, r: OracleResult) -> Self {
        OracleDocument {
            data: ds.source().to_string(),
            m: req.m,
            r: req.r,
            samples: r.samples,
            features: r.features,
            error: r.error,
            pairs_evaluated: r.pairs_evaluated,
            tool_version: TOOL_VERSION.into(),
        }
    }
}
