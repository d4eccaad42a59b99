//! Watches the neighbor-only variant reach exact stepsize consensus: each
//! agent grows its own stepsize under a summable budget and takes the min over
//! its closed neighborhood, so once line searches stop clamping, all stepsizes
//! coincide within a graph diameter of rounds and stay identical forever.
//!
//! Run with: cargo run --example stepsize_consensus

use datos::engine::{local_datos_round, MessageLedger, SolverConfig, SolverState};
use datos::netgraph::{generate_erdos_renyi, GossipMatrix};
use datos::problems::{default_gamma_schedule, elastic_net};
use datos::stepsize::BudgetState;

fn main() {
    let m = 20;
    let prob = elastic_net(11, m, 20, 50, 1e-5, &default_gamma_schedule(m));

    for p in [0.1, 0.5, 0.9] {
        let graph = generate_erdos_renyi(m, p, 0).unwrap().graph;
        let diam = graph.diameter();
        let w = GossipMatrix::metropolis(&graph, 1.0 / 3.0).unwrap();

        let cfg = SolverConfig::default();
        let mut state = SolverState::init_for(&prob, cfg.alpha_init, cfg.seed);
        let mut budgets: Vec<BudgetState> =
            (0..m).map(|_| BudgetState::new(cfg.budget.clone(), cfg.alpha_init)).collect();
        let mut ledger = MessageLedger::default();

        let mut last_split = 0;
        for k in 1..=600 {
            local_datos_round(
                &mut state, &prob, &w, &cfg, &mut budgets, false, &mut ledger, None,
            )
            .unwrap();
            let lo = state.alphas.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = state.alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if lo != hi {
                last_split = k;
            }
        }
        println!(
            "p = {p:.1}  diameter = {diam}  stepsizes identical from round {} onward \
             (alpha = {:.6})",
            last_split + 1,
            state.alphas[0]
        );
    }
}
