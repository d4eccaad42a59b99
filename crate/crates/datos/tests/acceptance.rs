//! End-to-end acceptance suite. Each test prints a single pass/fail line and
//! enforces the stated tolerance and runtime budget.

use std::collections::BTreeSet;
use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView1};

use datos::engine::{
    datos_round, edge_count, lifted_round, local_datos_round, max_abs_column_sum, run,
    AdaptiveDys, Algorithm, LiftedState, MessageLedger, SolverConfig, SolverState,
};
use datos::linalg::sym_eig;
use datos::metrics::{
    default_support_tol, linear_rate_fit, optimality_gap, sublinear_bound_check,
    support_tracker, ErgodicAverage, ReferencePoint,
};
use datos::netgraph::{generate_erdos_renyi, GossipMatrix};
use datos::problems::{
    covariance_mle, default_gamma_schedule, elastic_net, logistic_l1, synthetic_classification,
    ProblemInstance, Smooth, TraceSign,
};
use datos::proxops::ProxSpec;
use datos::refsolver::prox_grad_reference;
use datos::stepsize::{budget_mass_bound, BudgetRule, BudgetState, LineSearchParams};

fn report(n: usize, name: &str, ok: bool) {
    println!("acceptance {n:02} {name}: {}", if ok { "pass" } else { "FAIL" });
    assert!(ok, "acceptance criterion {n} ({name}) failed");
}

fn gossip(m: usize, p: f64, seed: u64) -> GossipMatrix {
    let g = generate_erdos_renyi(m, p, seed).expect("connected draw").graph;
    GossipMatrix::metropolis(&g, 1.0 / 3.0).expect("valid c")
}

fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        worst = worst.max((x - y).abs());
    }
    worst
}

fn small_elastic(seed: u64) -> ProblemInstance {
    elastic_net(seed, 5, 8, 4, 0.05, &default_gamma_schedule(5))
}

fn desk_elastic(lambda: f64) -> ProblemInstance {
    elastic_net(11, 20, 20, 50, lambda, &default_gamma_schedule(20))
}

fn desk_logistic(seed: u64) -> ProblemInstance {
    logistic_l1(synthetic_classification(seed, 10, 30, 40), 1e-5).expect("valid labels")
}

fn desk_covariance() -> ProblemInstance {
    covariance_mle(5, 10, 100, 5, 0.1, 10.0, &Array2::eye(5), TraceSign::Positive)
        .expect("pd sigma")
}

#[test]
fn criterion_01_gossip_validity() {
    let start = Instant::now();
    let ps = [0.1, 0.5, 0.9];
    let c = 1.0 / 3.0;
    let mut ok = true;
    for seed in 0..100u64 {
        let p = ps[(seed % 3) as usize];
        let draw = generate_erdos_renyi(20, p, seed).expect("connected draw");
        let g = draw.graph;
        let w = GossipMatrix::metropolis(&g, c).expect("valid c");
        let wt = w.w_tilde();
        let wm = w.w();
        let m = w.m();
        for i in 0..m {
            let mut row_t = 0.0;
            let mut row_m = 0.0;
            for j in 0..m {
                ok &= (wt[[i, j]] - wt[[j, i]]).abs() <= 1e-12;
                ok &= wt[[i, j]] >= -1e-12 && wm[[i, j]] >= -1e-12;
                if i != j {
                    ok &= (wt[[i, j]] > 1e-12) == g.has_edge(i, j);
                    ok &= (wm[[i, j]] - c * wt[[i, j]]).abs() <= 1e-12;
                } else {
                    ok &= (wm[[i, i]] - ((1.0 - c) + c * wt[[i, i]])).abs() <= 1e-12;
                }
                row_t += wt[[i, j]];
                row_m += wm[[i, j]];
            }
            ok &= (row_t - 1.0).abs() <= 1e-12 && (row_m - 1.0).abs() <= 1e-12;
        }
        let (vals, _) = sym_eig(&wm.to_owned());
        ok &= vals[vals.len() - 1] >= 1.0 - 2.0 * c - 1e-12;
    }
    ok &= start.elapsed().as_secs_f64() < 5.0;
    report(1, "gossip_validity", ok);
}

#[test]
fn criterion_02_lifted_equivalence() {
    let start = Instant::now();
    let mut ok = true;
    for seed in 0..10u64 {
        let prob = small_elastic(seed);
        let w = gossip(5, 0.6, 100 + seed);
        let cfg = SolverConfig { seed, ..SolverConfig::default() };
        let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
        let mut lift = LiftedState::init(&w, state.x.clone(), state.s.clone());
        let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
        let mut ledger = MessageLedger::default();
        for _ in 0..50 {
            datos_round(&mut state, &prob, &w, &cfg, &mut budget, &mut ledger, None).unwrap();
            lifted_round(&mut lift, &prob, state.alphas[0]).unwrap();
            ok &= max_abs_diff(&state.x, &lift.x) <= 1e-10;
            ok &= max_abs_diff(&state.s, &lift.s) <= 1e-10;
            // Y started at zero, so the tracking block must reproduce Y itself.
            ok &= max_abs_diff(&lift.l_mat.dot(&state.t), &lift.y) <= 1e-9;
        }
    }
    ok &= start.elapsed().as_secs_f64() < 10.0;
    report(2, "lifted_equivalence", ok);
}

#[test]
fn criterion_03_uniform_stepsize_reduction() {
    let mut ok = true;
    for seed in 0..10u64 {
        let prob = small_elastic(seed);
        let w = gossip(5, 0.6, 100 + seed);
        let cfg = SolverConfig { seed, ..SolverConfig::default() };
        let mut global = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
        let mut local = global.clone();
        let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
        let mut budgets = vec![BudgetState::new(cfg.budget.clone(), cfg.alpha_init)];
        let mut ledger = MessageLedger::default();
        for _ in 0..100 {
            datos_round(&mut global, &prob, &w, &cfg, &mut budget, &mut ledger, None).unwrap();
            local_datos_round(&mut local, &prob, &w, &cfg, &mut budgets, true, &mut ledger, None)
                .unwrap();
            ok &= max_abs_diff(&global.x, &local.x) <= 1e-12;
            ok &= max_abs_diff(&global.s, &local.s) <= 1e-12;
            ok &= (global.alphas[0] - local.alphas[0]).abs() <= 1e-12;
        }
    }
    report(3, "uniform_stepsize_reduction", ok);
}

#[test]
fn criterion_04_linesearch_certificate_and_floor() {
    let prob = desk_elastic(1e-5);
    let w = gossip(20, 0.5, 7);
    let cfg = SolverConfig::default();
    let l_f = prob
        .meta
        .smoothness
        .as_ref()
        .unwrap()
        .iter()
        .cloned()
        .fold(0.0f64, f64::max);
    let floor = (cfg.alpha_init).min(cfg.eta * cfg.delta / l_f);
    let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
    let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
    let mut ledger = MessageLedger::default();
    let mut ok = true;
    for _ in 0..200 {
        let x_old = state.x.clone();
        let grads = prob.grad_stacked(state.x.view());
        datos_round(&mut state, &prob, &w, &cfg, &mut budget, &mut ledger, None).unwrap();
        let alpha = state.alphas[0];
        ok &= alpha >= floor - 1e-12;
        for i in 0..prob.m() {
            let step = &state.a.row(i) - &x_old.row(i);
            let lhs = prob.smooth(i).value(state.a.row(i));
            let rhs = prob.smooth(i).value(x_old.row(i))
                + grads.row(i).dot(&step)
                + cfg.delta / (2.0 * alpha) * step.dot(&step);
            ok &= lhs <= rhs + 1e-12;
        }
    }
    report(4, "linesearch_certificate_and_floor", ok);
}

#[test]
fn criterion_05_budget_discipline() {
    let mut ok = true;
    // Per-round growth cap along actual runs, under both budget rules.
    for rule in [
        BudgetRule::Fixed { beta: 1.0, p: 2.0 },
        BudgetRule::DropReset { beta: 1.0, p: 2.0, q: 2.0, eta_prime: 0.9 },
    ] {
        let prob = desk_elastic(1e-5);
        let w = gossip(20, 0.5, 7);
        let cfg = SolverConfig { budget: rule, ..SolverConfig::default() };
        let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
        let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
        let mut ledger = MessageLedger::default();
        for _ in 0..200 {
            let prev = state.alphas[0];
            let rep =
                datos_round(&mut state, &prob, &w, &cfg, &mut budget, &mut ledger, None).unwrap();
            ok &= state.alphas[0].powi(2) - prev.powi(2) <= rep.budget_used + 1e-12;
        }
    }

    // Mass bound over synthetic stepsize histories.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(99);
    for h in 0..100_000u64 {
        let rule = if h % 2 == 0 {
            BudgetRule::Fixed { beta: 0.5 + (h % 5) as f64, p: 2.0 + (h % 3) as f64 * 0.5 }
        } else {
            BudgetRule::DropReset {
                beta: 0.5 + (h % 5) as f64,
                p: 1.5 + (h % 3) as f64 * 0.5,
                q: 1.5 + (h % 4) as f64 * 0.5,
                eta_prime: 0.5 + 0.4 * rng.gen::<f64>(),
            }
        };
        let alpha0 = 10f64.powf(rng.gen_range(-3.0..2.0));
        let mut st = BudgetState::new(rule.clone(), alpha0);
        let mut alpha = alpha0;
        let mut mass = 0.0;
        for _ in 0..50 {
            mass += st.next(alpha);
            alpha *= 10f64.powf(rng.gen_range(-0.5..0.1));
        }
        ok &= mass <= budget_mass_bound(&rule) + 1e-9;
    }
    report(5, "budget_discipline", ok);
}

#[test]
fn criterion_06_finite_time_stepsize_consensus() {
    let mut ok = true;
    for &p in &[0.1, 0.5, 0.9] {
        for seed in 0..5u64 {
            let prob = desk_elastic(1e-5);
            let w = gossip(20, p, seed);
            let cfg = SolverConfig { seed, ..SolverConfig::default() };
            let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
            let mut budgets =
                vec![BudgetState::new(cfg.budget.clone(), cfg.alpha_init); 20];
            let mut ledger = MessageLedger::default();
            let mut last_split = 0usize;
            for k in 1..=600usize {
                local_datos_round(&mut state, &prob, &w, &cfg, &mut budgets, false, &mut ledger, None)
                    .unwrap();
                let lo = state.alphas.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = state.alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                if lo != hi {
                    last_split = k;
                }
                if k % 25 == 0 {
                    ok &= max_abs_column_sum(state.d.view()) <= 1e-9;
                }
            }
            ok &= last_split < 500;
        }
    }
    report(6, "finite_time_stepsize_consensus", ok);
}

fn reference_for(prob: &ProblemInstance) -> ReferencePoint {
    prox_grad_reference(prob, 1e-12, 2_000_000).expect("reference solve").reference_point()
}

#[test]
fn criterion_07_global_convergence() {
    let start = Instant::now();
    let mut ok = true;
    let families: Vec<(ProblemInstance, usize)> = vec![
        (desk_logistic(0), 10),
        (desk_elastic(1e-5), 20),
        (desk_covariance(), 10),
    ];
    for (prob, m) in families {
        let reference = reference_for(&prob);
        let w = gossip(m, 0.5, 1);
        for algo in [Algorithm::Datos, Algorithm::LocalDatos { forced_global_min: false }] {
            let cfg = SolverConfig { k_max: 20_000, stop: Some(1e-8), ..SolverConfig::default() };
            let trace = run(&prob, &w, algo, &cfg, Some(&reference)).unwrap();
            let last = trace.rows.last().unwrap();
            ok &= last.gap_surrogate.unwrap() <= 1e-8;
            ok &= last.consensus_err.unwrap() <= 1e-8;
            ok &= last.k <= 20_000;
        }
    }
    ok &= start.elapsed().as_secs_f64() < 120.0;
    report(7, "global_convergence", ok);
}

#[test]
fn criterion_08_sublinear_certificate() {
    let mut ok = true;
    for seed in 0..3u64 {
        let prob = desk_logistic(seed);
        let reference = reference_for(&prob);
        let w = gossip(10, 0.5, 21 + seed);
        let cfg = SolverConfig { seed, ..SolverConfig::default() };
        let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
        let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
        let mut ledger = MessageLedger::default();
        let mut erg = ErgodicAverage::new(10, 40);
        let mut gaps = Vec::new();
        for _ in 0..400 {
            datos_round(&mut state, &prob, &w, &cfg, &mut budget, &mut ledger, None).unwrap();
            erg.push(state.a.view(), state.s.view(), state.alphas[0]);
            let (a_bar, _) = erg.averages().unwrap();
            gaps.push(optimality_gap(a_bar.view(), &prob, &reference));
            if state.k % 25 == 0 {
                ok &= max_abs_column_sum(state.d.view()) <= 1e-9;
            }
        }
        let (_c_hat, fine) = sublinear_bound_check(&gaps);
        ok &= fine;
    }
    report(8, "sublinear_certificate", ok);
}

#[test]
fn criterion_09_support_identification_and_linear_rate() {
    let prob = desk_elastic(0.05);
    let reference = reference_for(&prob);
    let tol = default_support_tol(reference.x_star.view());
    let ref_support: Vec<usize> =
        (0..prob.d()).filter(|&j| reference.x_star[j].abs() > tol).collect();
    let mut ok = !ref_support.is_empty() && ref_support.len() < prob.d();

    let w = gossip(20, 0.5, 9);
    let cfg = SolverConfig { ..SolverConfig::default() };
    let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
    let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
    let mut ledger = MessageLedger::default();
    let mut identified_at: Option<usize> = None;
    let mut err2 = Vec::new();
    for _ in 0..4000 {
        datos_round(&mut state, &prob, &w, &cfg, &mut budget, &mut ledger, None).unwrap();
        let (_supports, identified) = support_tracker(state.x.view(), &reference, tol);
        match (identified_at, identified) {
            (None, true) => identified_at = Some(state.k),
            (Some(_), false) => ok = false,
            _ => {}
        }
        let mut sq = 0.0;
        for row in state.x.rows() {
            let diff = &row - &reference.x_star;
            sq += diff.dot(&diff);
        }
        if identified_at.is_some() {
            err2.push(sq);
        }
        if state.k % 100 == 0 {
            ok &= max_abs_column_sum(state.d.view()) <= 1e-9;
        }
        if sq < 1e-22 {
            break;
        }
    }
    ok &= identified_at.is_some();
    let clean: Vec<f64> = err2.into_iter().filter(|&v| v > 1e-21).collect();
    ok &= clean.len() >= 10;
    if clean.len() >= 10 {
        let window = clean.len().min(200);
        let (rho, r2) = linear_rate_fit(&clean, window).unwrap();
        ok &= rho < 1.0 && r2 >= 0.98;
    }
    report(9, "support_identification_and_linear_rate", ok);
}

#[test]
fn criterion_10_dual_block_column_sums() {
    let mut ok = true;
    let families: Vec<(ProblemInstance, usize)> =
        vec![(desk_logistic(0), 10), (desk_elastic(1e-5), 20), (desk_covariance(), 10)];
    for (prob, m) in families {
        let w = gossip(m, 0.5, 1);
        let cfg = SolverConfig::default();

        let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
        let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
        let mut ledger = MessageLedger::default();
        for _ in 0..300 {
            datos_round(&mut state, &prob, &w, &cfg, &mut budget, &mut ledger, None).unwrap();
            ok &= max_abs_column_sum(state.d.view()) <= 1e-9;
        }

        let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
        let mut budgets = vec![BudgetState::new(cfg.budget.clone(), cfg.alpha_init); m];
        for _ in 0..300 {
            local_datos_round(&mut state, &prob, &w, &cfg, &mut budgets, false, &mut ledger, None)
                .unwrap();
            ok &= max_abs_column_sum(state.d.view()) <= 1e-9;
        }
    }
    report(10, "dual_block_column_sums", ok);
}

#[test]
fn criterion_11_communication_contract() {
    let prob = desk_elastic(1e-5);
    let w = gossip(20, 0.5, 3);
    let edges: BTreeSet<(usize, usize)> = {
        let wt = w.w_tilde();
        let mut e = BTreeSet::new();
        for i in 0..20 {
            for j in (i + 1)..20 {
                if wt[[i, j] ] != 0.0 {
                    e.insert((i, j));
                }
            }
        }
        e
    };
    let e_count = edge_count(&w);
    let cfg = SolverConfig::default();
    let rounds = 5u64;
    let mut ok = true;

    let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
    let mut budgets = vec![BudgetState::new(cfg.budget.clone(), cfg.alpha_init); 20];
    let mut ledger = MessageLedger::default();
    let mut touched = BTreeSet::new();
    for _ in 0..rounds {
        local_datos_round(
            &mut state,
            &prob,
            &w,
            &cfg,
            &mut budgets,
            false,
            &mut ledger,
            Some(&mut touched),
        )
        .unwrap();
    }
    ok &= touched.iter().all(|pair| edges.contains(pair));
    ok &= ledger.broadcast_msgs == 0;
    ok &= ledger.scalar_msgs == rounds * e_count;

    let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
    let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
    let mut ledger = MessageLedger::default();
    let mut touched = BTreeSet::new();
    for r in 1..=rounds {
        datos_round(&mut state, &prob, &w, &cfg, &mut budget, &mut ledger, Some(&mut touched))
            .unwrap();
        ok &= ledger.broadcast_msgs == r * 20;
    }
    ok &= touched.iter().all(|pair| edges.contains(pair));
    ok &= ledger.scalar_msgs == 0;
    report(11, "communication_contract", ok);
}

#[test]
fn criterion_12_centralized_byproduct() {
    struct Quadratic {
        b: f64,
    }
    impl Smooth for Quadratic {
        fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
            0.5 * (x[0] - self.b).powi(2)
        }
        fn grad(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
            ndarray::array![x[0] - self.b]
        }
    }
    let f = Quadratic { b: 2.0 };
    let lambda = 0.5;
    let r1 = ProxSpec::L1 { lambda };
    let r2 = ProxSpec::Zero;
    let expected = (2.0f64.abs() - lambda).max(0.0) * 2.0f64.signum();
    let mut solver = AdaptiveDys::new(
        ndarray::array![-3.0],
        ndarray::array![0.0],
        &f,
        &r1,
        &r2,
        LineSearchParams::default(),
        BudgetRule::Fixed { beta: 1.0, p: 2.0 },
        10.0,
    );
    let mut ok = false;
    for _ in 0..1000 {
        solver.step().unwrap();
        if (solver.x[0] - expected).abs() <= 1e-10 {
            ok = true;
            break;
        }
    }
    report(12, "centralized_byproduct", ok);
}
