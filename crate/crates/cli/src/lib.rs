//! Command-line front end: `solve`, `select`, `bench` and `oracle`.
//!
//! Each command is a plain function from a loaded dataset and a
//! [`RunConfig`] to the bytes written to `--out`, so the binary and the
//! library produce identical output for the same effective configuration.

pub mod config;
pub mod document;

use std::io::Write;
use std::path::{Path, PathBuf};

use alfs_core::admm::{self, SolverError};
use alfs_core::bench::{self, BenchError};
use alfs_core::data::{self, DataError, SplitSpec};
use alfs_core::selection::{self, SelectionError};
use alfs_core::{Dataset, LoadOptions, SelectionRequest};
use thiserror::Error;

pub use config::{parse_budget_range, BenchConfig, DataConfig, RunConfig, SelectionConfig};
pub use document::{OracleDocument, ResultDocument, SelectDocument};

/// Environment variable that sets the size of the worker pool.
pub const THREADS_ENV: &str = "ALFS_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config, data or paths. Exit code 2.
    #[error("{0}")]
    Usage(String),
    /// The computation itself failed. Exit code 3.
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidParams(_) | SolverError::InvalidConfig(_) | SolverError::Shape(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::Linalg(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Solver(s) => s.into(),
            BenchError::Selection(s) => s.into(),
            BenchError::Linalg(_) | BenchError::Baseline(_) | BenchError::GridFailed(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

/// Builds the global worker pool from [`THREADS_ENV`] when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot configure {n} threads: {e}")))
}

pub fn load(path: &Path, options: &LoadOptions, standardize: bool) -> Result<Dataset, CliError> {
    let ds = data::load_csv(path, options)?;
    Ok(if standardize { ds.standardized() } else { ds })
}

/// Resolves the data path (flag wins over config) and loads it.
pub fn load_for(cfg: &mut RunConfig, flag: Option<&Path>) -> Result<Dataset, CliError> {
    if let Some(p) = flag {
        cfg.data.path = Some(p.to_path_buf());
    }
    let path = cfg.data.path.clone().ok_or_else(|| CliError::Usage("no data: pass --data or set data.path".into()))?;
    load(&path, &cfg.data.load, cfg.data.standardize)
}

/// Solves, ranks and selects; `cfg.selection` is filled in with the
/// budgets actually used so that the echo replays the run.
pub fn solve_document(ds: &Dataset, cfg: &mut RunConfig) -> Result<ResultDocument, CliError> {
    cfg.validate()?;
    let req = resolve_selection(ds, cfg)?;
    let out = admm::solve(ds, &cfg.params, &cfg.solver)?;
    let sel = selection::rank_and_select(&out.w, req)?;
    Ok(ResultDocument::new(&out, &sel, cfg))
}

/// Like [`solve_document`] but keeps only the selection and scores.
pub fn select_document(ds: &Dataset, cfg: &mut RunConfig) -> Result<SelectDocument, CliError> {
    solve_document(ds, cfg).map(SelectDocument::from)
}

fn resolve_selection(ds: &Dataset, cfg: &mut RunConfig) -> Result<SelectionRequest, CliError> {
    let req = cfg.selection.resolve(ds.n_samples(), ds.n_features());
    req.validate(ds.n_samples(), ds.n_features())?;
    cfg.selection = SelectionConfig { m: Some(req.m), r: Some(req.r) };
    Ok(req)
}

pub struct BenchOutput {
    pub csv: Vec<u8>,
    pub curves: Vec<bench::AccuracyCurve>,
}

/// Splits `ds`, runs every configured method and renders the curves CSV.
pub fn bench_csv(ds: &Dataset, cfg: &mut RunConfig) -> Result<BenchOutput, CliError> {
    cfg.validate()?;
    if ds.labels().is_none() {
        return Err(CliError::Usage("bench needs a labeled dataset: set data.load.label_column or --label-column".into()));
    }
    let b = &mut cfg.bench;
    if b.methods.is_empty() {
        return Err(CliError::Usage("no methods given".into()));
    }
    let n_train = *b.n_train.get_or_insert(ds.n_samples() / 2);
    let (train, test) = data::split(ds, SplitSpec { n_train, seed: b.seed })?;
    let mut curves = Vec::with_capacity(b.methods.len());
    for &m in &b.methods {
        let spec = b.spec(m);
        spec.validate(train.n_samples(), train.n_features())?;
        curves.push(bench::run_curve(&train, &test, &spec, &cfg.params, &cfg.solver)?);
    }
    let mut csv = Vec::new();
    bench::write_curves_csv(&curves, &mut csv)?;
    Ok(BenchOutput { csv, curves })
}

pub fn oracle_document(ds: &Dataset, req: SelectionRequest) -> Result<OracleDocument, CliError> {
    let r = selection::oracle_best_subsets(ds.matrix(), req)?;
    Ok(OracleDocument::new(ds, req, r))
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("documents serialize");
    v.push(b'\n');
    v
}

/// Writes `bytes` to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&PathBuf>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Usage(format!("cannot write to stdout: {e}"))),
    }
}
