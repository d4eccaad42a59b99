//! Checks the network recursion against the dense lifted primal-dual
//! recursion it compresses: with `L^2 = I - W` and `M^2 = W`, both produce
//! identical primal and dual iterates, and the tracking block satisfies
//! `L T^k = Y^k - Y^0` without any agent ever materializing Y.
//!
//! Run with: cargo run --example lifted_oracle

use datos::engine::{datos_round, lifted_round, LiftedState, MessageLedger, SolverConfig, SolverState};
use datos::netgraph::{generate_erdos_renyi, GossipMatrix};
use datos::problems::{default_gamma_schedule, elastic_net};
use datos::stepsize::BudgetState;

fn main() {
    let prob = elastic_net(0, 5, 8, 4, 0.05, &default_gamma_schedule(5));
    let graph = generate_erdos_renyi(5, 0.6, 100).unwrap().graph;
    let w = GossipMatrix::metropolis(&graph, 1.0 / 3.0).unwrap();

    let cfg = SolverConfig::default();
    let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
    let mut lift = LiftedState::init(&w, state.x.clone(), state.s.clone());
    let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
    let mut ledger = MessageLedger::default();

    println!("round   |X - X_lift|     |S - S_lift|     |L T - Y|");
    for k in 1..=50 {
        datos_round(&mut state, &prob, &w, &cfg, &mut budget, &mut ledger, None).unwrap();
        lifted_round(&mut lift, &prob, state.alphas[0]).unwrap();
        let dx = diff(&state.x, &lift.x);
        let ds = diff(&state.s, &lift.s);
        let dt = diff(&lift.l_mat.dot(&state.t), &lift.y);
        if k % 10 == 0 || k == 1 {
            println!("{k:>5}   {dx:>13.3e}   {ds:>13.3e}   {dt:>13.3e}");
        }
        assert!(dx < 1e-10 && ds < 1e-10 && dt < 1e-9);
    }
    println!("\nnetwork and lifted recursions agree to working precision");
}

fn diff(a: &ndarray::Array2<f64>, b: &ndarray::Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
