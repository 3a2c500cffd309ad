use std::path::PathBuf;

use alfs_core::bench::{BenchSpec, Classifier, GridSpec, Method};
use alfs_core::{LoadOptions, RegularizationParams, SelectionRequest, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Run configuration. Every section is optional; missing fields take the
/// built-in defaults, so `{}` is a valid config.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataConfig,
    pub params: RegularizationParams,
    pub solver: SolverConfig,
    pub selection: SelectionConfig,
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Overridden by `--data`.
    pub path: Option<PathBuf>,
    pub load: LoadOptions,
    /// Standardize each feature to zero mean and unit variance after loading.
    pub standardize: bool,
}

/// Budgets for `solve` and `select`. A missing budget keeps everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionConfig {
    pub m: Option<usize>,
    pub r: Option<usize>,
}

impl SelectionConfig {
    pub fn resolve(&self, n_samples: usize, n_features: usize) -> SelectionRequest {
        SelectionRequest { m: self.m.unwrap_or(n_samples), r: self.r.unwrap_or(n_features) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub methods: Vec<Method>,
    pub sample_budgets: Vec<usize>,
    pub feature_budgets: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub classifier: Classifier,
    /// Tune ALFS per budget over this grid; `null` uses `params` as given.
    pub grid: Option<GridSpec>,
    /// Training-set size of the train/test split; defaults to half the samples.
    pub n_train: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: vec!["alfs".parse().expect("known method"), "random".parse().expect("known method")],
            sample_budgets: Vec::new(),
            feature_budgets: Vec::new(),
            repeats: 10,
            seed: 0,
            classifier: Classifier::default(),
            grid: None,
            n_train: None,
        }
    }
}

impl BenchConfig {
    pub fn spec(&self, method: Method) -> BenchSpec {
        BenchSpec {
            method,
            sample_budgets: self.sample_budgets.clone(),
            feature_budgets: self.feature_budgets.clone(),
            repeats: self.repeats,
            seed: self.seed,
            classifier: self.classifier,
            grid: self.grid.clone(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    pub fn read(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks every section that does not depend on the data.
    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: &dyn std::fmt::Display| CliError::Usage(e.to_string());
        self.params.validate().map_err(|e| usage(&e))?;
        self.solver.validate().map_err(|e| usage(&e))?;
        if self.selection.m == Some(0) || self.selection.r == Some(0) {
            return Err(CliError::Usage("selection budgets must be >= 1".into()));
        }
        if self.bench.repeats == 0 {
            return Err(CliError::Usage("bench.repeats must be >= 1".into()));
        }
        if let Some(g) = &self.bench.grid {
            g.validate().map_err(|e| usage(&e))?;
        }
        let Classifier::Knn { k } = self.bench.classifier;
        if k == 0 {
            return Err(CliError::Usage("bench.classifier.k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Parses `lo:hi:step` into `lo, lo+step, ..., <= hi`.
pub fn parse_budget_range(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("budgets {s:?}: expected lo:hi:step with 1 <= lo <= hi and step >= 1"));
    let parts: Vec<usize> = s.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if lo == 0 || lo > hi || step == 0 {
        return Err(bad());
    }
    Ok((lo..=hi).step_by(step).collect())
}
