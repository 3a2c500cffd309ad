use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use alfs_cli::{
    bench_csv, emit, init_threads, load, load_for, oracle_document, parse_budget_range,
    solve_document, to_json, CliError, RunConfig, SelectDocument,
};
use alfs_core::bench::Method;
use alfs_core::{LoadOptions, Orientation, SelectionRequest};
use clap::{Args, Parser, Subcommand};

/// Joint unsupervised sample and feature selection.
///
/// Exit codes: 0 success, 2 usage or validation error, 3 numerical failure.
/// ALFS_THREADS sets the number of worker threads.
#[derive(Parser)]
#[command(name = "alfs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve, rank and select; writes the full result document with traces.
    Solve(SolveArgs),
    /// Like `solve`, but writes only the selection and scores.
    Select(SelectArgs),
    /// Accuracy curves of selection methods on a labeled dataset.
    Bench(BenchArgs),
    /// Exhaustive best subsets for small instances.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SolveArgs {
    /// CSV data file; overrides data.path in the config.
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall time in the output (makes reruns differ).
    #[arg(long)]
    record_time: bool,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    common: SolveArgs,
    /// Number of samples to select; overrides selection.m.
    #[arg(long)]
    m: Option<usize>,
    /// Number of features to select; overrides selection.r.
    #[arg(long)]
    r: Option<usize>,
}

#[derive(Args)]
struct LoadArgs {
    /// Column holding class labels.
    #[arg(long)]
    label_column: Option<String>,
    /// The file has no header row.
    #[arg(long)]
    no_header: bool,
    /// Rows of the file are features rather than samples.
    #[arg(long)]
    rows_are_features: bool,
}

impl LoadArgs {
    fn apply(&self, o: &mut LoadOptions) {
        if self.label_column.is_some() {
            o.label_column = self.label_column.clone();
        }
        if self.no_header {
            o.has_header = false;
        }
        if self.rows_are_features {
            o.orientation = Orientation::RowsAreFeatures;
        }
    }
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON run configuration; flags override its bench section.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    load: LoadArgs,
    /// Comma-separated methods: alfs, random, rcur, variance+<method>.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Sample budgets as lo:hi:step.
    #[arg(long)]
    budgets: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Training-set size; half the samples by default.
    #[arg(long)]
    n_train: Option<usize>,
    /// Tune ALFS per budget over the default parameter grid.
    #[arg(long)]
    grid: bool,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    load: LoadArgs,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    r: usize,
    /// JSON output; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_config(path: Option<&PathBuf>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => RunConfig::read(p),
        None => Ok(RunConfig::default()),
    }
}

fn solve_like(a: &SolveArgs, sel: Option<(Option<usize>, Option<usize>)>) -> Result<(), CliError> {
    let mut cfg = read_config(a.config.as_ref())?;
    if let Some((m, r)) = sel {
        cfg.selection.m = m.or(cfg.selection.m);
        cfg.selection.r = r.or(cfg.selection.r);
    }
    cfg.validate()?;
    let ds = load_for(&mut cfg, a.data.as_deref())?;
    let start = Instant::now();
    let mut doc = solve_document(&ds, &mut cfg)?;
    if a.record_time {
        doc.wall_time_seconds = Some(start.elapsed().as_secs_f64());
    }
    match sel {
        None => emit(a.out.as_ref(), &to_json(&doc)),
        Some(_) => emit(a.out.as_ref(), &to_json(&SelectDocument::from(doc))),
    }
}

fn run_bench(a: &BenchArgs) -> Result<(), CliError> {
    let mut cfg = read_config(a.config.as_ref())?;
    a.load.apply(&mut cfg.data.load);
    let b = &mut cfg.bench;
    if let Some(m) = &a.methods {
        b.methods = m.clone();
    }
    if let Some(s) = &a.budgets {
        b.sample_budgets = parse_budget_range(s)?;
    }
    b.repeats = a.repeats.unwrap_or(b.repeats);
    b.seed = a.seed.unwrap_or(b.seed);
    b.n_train = a.n_train.or(b.n_train);
    if a.grid {
        b.grid.get_or_insert_with(Default::default);
    }
    if b.sample_budgets.is_empty() {
        return Err(CliError::Usage("no budgets: pass --budgets lo:hi:step".into()));
    }
    cfg.validate()?;
    let ds = load_for(&mut cfg, a.data.as_deref())?;
    let out = bench_csv(&ds, &mut cfg)?;
    emit(a.out.as_ref(), &out.csv)?;
    let failures: Vec<String> = out
        .curves
        .iter()
        .flat_map(|c| c.failures.iter().map(move |f| format!("{} budget {} repeat {}: {}", c.method, f.budget, f.repeat, f.message)))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("{} cells failed:\n{}", failures.len(), failures.join("\n"))))
    }
}

fn run_oracle(a: &OracleArgs) -> Result<(), CliError> {
    let mut options = LoadOptions::default();
    a.load.apply(&mut options);
    let ds = load(&a.data, &options, false)?;
    let doc = oracle_document(&ds, SelectionRequest { m: a.m, r: a.r })?;
    emit(a.out.as_ref(), &to_json(&doc))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Solve(a) => solve_like(a, None),
        Command::Select(a) => solve_like(&a.common, Some((a.m, a.r))),
        Command::Bench(a) => run_bench(a),
        Command::Oracle(a) => run_oracle(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
