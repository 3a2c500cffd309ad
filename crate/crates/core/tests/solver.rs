use alfs_core::admm::{self, RegularizationParams, SolverConfig, SolverState, StopReason};
use alfs_core::lbfgs::LbfgsConfig;
use alfs_core::prox;
use alfs_core::selection;
use alfs_core::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..1.0))
}

fn random_state(d: usize, n: usize, rng: &mut ChaCha8Rng) -> SolverState {
    SolverState {
        w: uniform(n, d, 0.5, rng),
        z: uniform(n, n, 0.5, rng),
        w_tilde: uniform(n, d, 0.5, rng),
        lambda1: uniform(n, n, 1.0, rng),
        lambda2: uniform(n, d, 1.0, rng),
        rho1: rng.random_range(0.1..10.0),
        rho2: rng.random_range(0.1..10.0),
        iter: 0,
    }
}

fn fd_relative_error(x: &DMatrix<f64>, s: &SolverState, p: &RegularizationParams) -> f64 {
    let g = admm::w_subproblem_gradient(x, s, p).unwrap();
    let h = 1e-6;
    let mut fd = DMatrix::zeros(g.nrows(), g.ncols());
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let (mut plus, mut minus) = (s.w.clone(), s.w.clone());
            plus[(i, j)] += h;
            minus[(i, j)] -= h;
            let fp = admm::w_subproblem_objective(x, s, p, &plus).unwrap();
            let fm = admm::w_subproblem_objective(x, s, p, &minus).unwrap();
            fd[(i, j)] = (fp - fm) / (2.0 * h);
        }
    }
    (fd - &g).norm() / g.norm()
}

#[test]
fn gradient_matches_finite_differences() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = uniform(6, 9, 1.0, &mut rng);
        let s = random_state(6, 9, &mut rng);
        let smooth_only = RegularizationParams { alpha: 0.0, beta: 0.0, ..Default::default() };
        let full = RegularizationParams { alpha: 0.7, beta: 1.3, ..Default::default() };
        for p in [smooth_only, full] {
            let err = fd_relative_error(&x, &s, &p);
            assert!(err < 1e-5, "seed {seed}: relative error {err}");
        }
    }
}

#[test]
fn penalty_dominated_w_step_stays_put() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = uniform(4, 5, 1.0, &mut rng);
    let w0 = uniform(5, 4, 1.0, &mut rng);
    let s = SolverState {
        z: &w0 * &x,
        w_tilde: w0.clone(),
        w: w0.clone(),
        ..SolverState::zeros(4, 5, 1e8, 1e8)
    };
    let step = admm::solve_w_subproblem(&x, &s, &RegularizationParams::default(), &LbfgsConfig::default()).unwrap();
    assert!((step.w - w0).amax() < 1e-3);
}

#[test]
fn w_step_matches_gradient_descent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = uniform(2, 3, 1.0, &mut rng);
    let p = RegularizationParams { alpha: 0.0, beta: 0.0, ..Default::default() };
    let s = random_state(2, 3, &mut rng);
    let tight = LbfgsConfig { grad_tol: 1e-10, max_iters: 500, ..Default::default() };
    let step = admm::solve_w_subproblem(&x, &s, &p, &tight).unwrap();

    // plain gradient descent with step 1/L from several starts
    let xn = x.norm_squared();
    let lipschitz = 2.0 * xn * xn + s.rho1 * xn + s.rho2;
    let mut best = f64::INFINITY;
    for start in 0..5 {
        let mut st = SolverState { w: uniform(3, 2, 2.0, &mut rng), ..s.clone() };
        if start == 0 {
            st.w.fill(0.0);
        }
        for _ in 0..200_000 {
            let g = admm::w_subproblem_gradient(&x, &st, &p).unwrap();
            st.w -= g / lipschitz;
        }
        best = best.min(admm::w_subproblem_objective(&x, &s, &p, &st.w).unwrap());
    }
    assert!((step.final_value - best).abs() <= 1e-4 * (1.0 + best.abs()), "{} vs {best}", step.final_value);
}

#[test]
fn h_seminorm_matches_explicit_quadratic_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (d, n) = (2, 3);
    let x = uniform(d, n, 1.0, &mut rng);
    let a = random_state(d, n, &mut rng);
    let b = random_state(d, n, &mut rng);
    let delta = a.delta(&b);
    let (r1, r2) = (0.7, 1.9);
    // blocks: vec(ΔW) with H = ρ1·(XXᵀ ⊗ I) + ρ2·I, then diagonal blocks for Z, W̃, Λ1, Λ2
    let k = n * d;
    let mut h = DMatrix::zeros(k, k);
    let sxx = &x * x.transpose();
    for c1 in 0..d {
        for c2 in 0..d {
            for r in 0..n {
                // column-major vec: entry (r, c) at c*n + r
                h[(c1 * n + r, c2 * n + r)] += r1 * sxx[(c2, c1)];
            }
        }
    }
    for i in 0..k {
        h[(i, i)] += r2;
    }
    let v = alfs_core::DVector::from_column_slice(delta.w.as_slice());
    let explicit = v.dot(&(&h * &v))
        + r1 * delta.z.norm_squared()
        + r2 * delta.w_tilde.norm_squared()
        + delta.lambda1.norm_squared() / r1
        + delta.lambda2.norm_squared() / r2;
    let got = admm::h_seminorm_sq(&delta, &x, r1, r2);
    assert!((got - explicit).abs() <= 1e-10 * explicit.max(1.0), "{got} vs {explicit}");
}

#[test]
fn repeated_column_converges_with_conditions_met() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut x = uniform(4, 6, 1.0, &mut rng);
    let c = x.column(1).into_owned();
    x.set_column(4, &c);
    let p = RegularizationParams { alpha: 0.1, beta: 0.1, gamma: 0.1, eta: 0.1, ..Default::default() };
    let cfg = SolverConfig::default();
    let out = admm::solve_matrix(&x, &p, &cfg).unwrap();
    assert_eq!(out.report.stop_reason, StopReason::Converged);
    let last = out.report.final_record().unwrap();
    assert!(last.residual_wx < cfg.epsilon && last.residual_w < cfg.epsilon);
    assert!(last.relative_change.unwrap() < cfg.epsilon);
    let t = prox::angular_weights(&x, p.varsigma).unwrap();
    assert_eq!(admm::objective(&x, &out.state.w, &p, &t).unwrap(), last.objective);
}

#[test]
fn solve_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = uniform(5, 8, 1.0, &mut rng);
    let run = || admm::solve_matrix(&x, &RegularizationParams::default(), &SolverConfig::default()).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.report, b.report);
    assert_eq!(a.w, b.w);
    assert_eq!(a.screened, b.screened);
}

#[test]
fn planted_representatives_rank_high() {
    let (d, n) = (10, 20);
    let mut hits = 0;
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut planted: Vec<usize> = rand::seq::index::sample(&mut rng, n, 3).into_vec();
        planted.sort_unstable();
        let reps = uniform(d, 3, 1.0, &mut rng);
        let mut x = DMatrix::zeros(d, n);
        for j in 0..n {
            let col = match planted.iter().position(|&p| p == j) {
                Some(k) => reps.column(k).into_owned(),
                None => {
                    // convex weights: the planted columns are the vertices of the hull
                    let coef = alfs_core::DVector::from_fn(3, |_, _| rng.random_range(0.0..1.0));
                    let coef = &coef / coef.sum();
                    &reps * coef + uniform(d, 1, 0.01, &mut rng).column(0)
                }
            };
            x.set_column(j, &col);
        }
        let out = admm::solve_matrix(&x, &RegularizationParams::default(), &SolverConfig::default()).unwrap();
        let sel = selection::rank_and_select(&out.w, alfs_core::data::SelectionRequest { m: 3, r: d }).unwrap();
        let found = sel.selected_samples.iter().filter(|i| planted.contains(i)).count();
        hits += (found >= 2) as usize;
    }
    assert!(hits >= 8, "recovered at least 2 of 3 planted columns in {hits}/10 seeds");
}

#[test]
fn group_norm_shrinks_as_alpha_grows() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x = uniform(8, 12, 1.0, &mut rng);
    let norms: Vec<f64> = [0.1, 1.0, 10.0, 100.0]
        .iter()
        .map(|&alpha| {
            let p = RegularizationParams { alpha, ..Default::default() };
            let w = admm::solve_matrix(&x, &p, &SolverConfig::default()).unwrap().w;
            prox::l21_norm(&w).unwrap()
        })
        .collect();
    // the ADMM iterate is only ε-accurate, so allow a small relative slack
    for pair in norms.windows(2) {
        assert!(pair[1] <= pair[0] * 1.01 + 1e-9, "{norms:?}");
    }
}
