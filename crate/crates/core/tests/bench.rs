use std::sync::Mutex;

use alfs_core::admm::{RegularizationParams, SolverConfig};
use alfs_core::bench::{
    self, AlfsSelector, BenchError, BenchSpec, Budget, GridSpec, LabelOracle, Picked, RandomSelector, RcurSelector,
    Selector,
};
use alfs_core::data::{self, Dataset, PlantedClusters, SplitSpec};

fn planted(n: usize, d: usize, separation: f64, seed: u64) -> (Dataset, Dataset) {
    let ds = PlantedClusters { n_samples: n, n_features: d, classes: 3, separation, noise: 1.0 }
        .generate(seed)
        .unwrap();
    data::split(&ds, SplitSpec { n_train: n / 2, seed }).unwrap()
}

#[test]
fn full_budget_matches_full_data_accuracy() {
    let (train, test) = planted(40, 5, 1.0, 3);
    let full = bench::knn_classify(&train, &test, 1).unwrap().accuracy.unwrap();
    let n = train.n_samples();
    let selectors: Vec<Box<dyn Selector>> = vec![
        Box::new(RandomSelector),
        Box::new(RcurSelector::default()),
        Box::new(AlfsSelector::fixed(RegularizationParams::default(), SolverConfig::default())),
    ];
    for s in &selectors {
        let spec = BenchSpec::new("random".parse().unwrap(), vec![n], 2, 0);
        let curve = bench::run_curve_with(&train, &test, &spec, s.as_ref()).unwrap();
        assert_eq!(curve.accuracies[0], vec![Some(full); 2], "{}", s.name());
    }
}

#[test]
fn curves_are_reproducible() {
    let (train, test) = planted(60, 6, 1.0, 4);
    for method in ["random", "rcur", "variance+random"] {
        let mut spec = BenchSpec::new(method.parse().unwrap(), vec![3, 6, 9], 3, 17);
        if method.starts_with("variance") {
            spec.feature_budgets = vec![3];
        }
        let run = || bench::run_curve(&train, &test, &spec, &Default::default(), &Default::default()).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert!(a.is_complete());
        let mut csv_a = Vec::new();
        let mut csv_b = Vec::new();
        bench::write_curves_csv(&[a], &mut csv_a).unwrap();
        bench::write_curves_csv(&[b], &mut csv_b).unwrap();
        assert_eq!(csv_a, csv_b);
        // header plus one row per (budget, repeat)
        assert_eq!(String::from_utf8(csv_a).unwrap().lines().count(), 1 + 9);
    }
}

#[test]
fn repeats_extend_without_reshuffling() {
    let (train, test) = planted(60, 6, 1.0, 5);
    let short = BenchSpec::new("random".parse().unwrap(), vec![4], 2, 9);
    let long = BenchSpec { repeats: 4, ..short.clone() };
    let a = bench::run_curve_with(&train, &test, &short, &RandomSelector).unwrap();
    let b = bench::run_curve_with(&train, &test, &long, &RandomSelector).unwrap();
    assert_eq!(a.accuracies[0][..], b.accuracies[0][..2]);
}

/// Wraps a selector and records what it was shown.
struct Spy<S> {
    inner: S,
    saw_labels: Mutex<Vec<bool>>,
    picked: Mutex<Vec<usize>>,
}

impl<S: Selector> Selector for Spy<S> {
    fn name(&self) -> String {
        self.inner.name()
    }

    fn uses_seed(&self) -> bool {
        self.inner.uses_seed()
    }

    fn select(&self, data: &Dataset, budgets: &[Budget], seed: u64, oracle: &LabelOracle) -> Result<Vec<Picked>, BenchError> {
        self.saw_labels.lock().unwrap().push(data.labels().is_some());
        let picks = self.inner.select(data, budgets, seed, oracle)?;
        for p in &picks {
            self.picked.lock().unwrap().extend(&p.samples);
        }
        Ok(picks)
    }
}

#[test]
fn selectors_never_see_labels() {
    let (train, test) = planted(60, 6, 1.0, 6);
    let spy = Spy { inner: RandomSelector, saw_labels: Mutex::new(vec![]), picked: Mutex::new(vec![]) };
    let spec = BenchSpec::new("random".parse().unwrap(), vec![2, 5], 3, 0);
    bench::run_curve_with(&train, &test, &spec, &spy).unwrap();
    let seen = spy.saw_labels.into_inner().unwrap();
    assert_eq!(seen, vec![false; 3]);

    // the oracle is the only path to training labels: replay the picks and
    // check that it reveals nothing else
    let labels = train.labels().unwrap();
    let oracle = LabelOracle::new(labels);
    let picks = RandomSelector.select(&train.unlabeled(), &[Budget { samples: 5, features: None }], 0, &oracle).unwrap();
    assert!(oracle.revealed().is_empty());
    oracle.reveal(&picks[0].samples).unwrap();
    let mut expected = picks[0].samples.clone();
    expected.sort_unstable();
    assert_eq!(oracle.revealed(), expected);
}

#[test]
fn unlabeled_inputs_are_rejected() {
    let (train, test) = planted(30, 4, 1.0, 7);
    let spec = BenchSpec::new("random".parse().unwrap(), vec![3], 1, 0);
    assert!(matches!(
        bench::run_curve_with(&train.unlabeled(), &test, &spec, &RandomSelector),
        Err(BenchError::Unlabeled(_))
    ));
    assert!(matches!(
        bench::run_curve_with(&train, &test.unlabeled(), &spec, &RandomSelector),
        Err(BenchError::Unlabeled(_))
    ));
}

#[test]
fn feature_sweep_restricts_classification() {
    let (train, test) = planted(60, 8, 1.0, 8);
    let mut spec = BenchSpec::new("variance+rcur".parse().unwrap(), vec![10], 2, 0);
    spec.feature_budgets = vec![1, 4, 8];
    let curve = bench::run_curve(&train, &test, &spec, &Default::default(), &Default::default()).unwrap();
    assert_eq!(curve.budgets, vec![1, 4, 8]);
    assert_eq!(curve.method, "variance+rcur");
    assert!(curve.is_complete());
}

#[test]
fn grid_search_runs_one_solve_per_point() {
    let (train, _) = planted(24, 4, 1.0, 9);
    let budget = Budget { samples: 4, features: None };
    let one = GridSpec { alpha: vec![10.0], beta: vec![0.1], eta: vec![1.0], gamma: 1.0 };
    let base = RegularizationParams::default();
    let cfg = SolverConfig::default();
    let t = bench::grid_search(&train, budget, &one, &base, &cfg, 1).unwrap();
    assert_eq!(t.solver_invocations, 1);
    assert_eq!((t.outcome.best.alpha, t.outcome.best.beta, t.outcome.best.eta), (10.0, 0.1, 1.0));

    let full = bench::grid_search(&train, budget, &GridSpec::default(), &base, &cfg, 1).unwrap();
    assert_eq!(full.solver_invocations, 64);
    assert_eq!(full.outcome.scores.len(), 64);
    // scored by reconstruction error below ten samples
    let best = full.outcome.scores.iter().filter_map(|s| s.as_ref().ok()).copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(full.outcome.best_score, best);
    assert!(best <= 0.0);
}

#[test]
fn tuned_alfs_beats_random_on_separated_clusters() {
    let (train, test) = planted(60, 8, 4.0, 10);
    let selector = AlfsSelector { grid: Some(GridSpec::default()), ..AlfsSelector::fixed(Default::default(), Default::default()) };
    let spec = BenchSpec::new("alfs".parse().unwrap(), vec![3], 10, 0);
    let alfs = bench::run_curve_with(&train, &test, &spec, &selector).unwrap();
    let random = bench::run_curve_with(&train, &test, &spec, &RandomSelector).unwrap();
    let (a, r) = (alfs.mean[0].unwrap(), random.mean[0].unwrap());
    assert!(a >= r, "alfs {a} < random {r}");
}
