//! Runs the coordinated solver, its neighbor-only variant, and the
//! fixed-stepsize PG-EXTRA baseline on one shared elastic-net instance, then
//! contrasts accuracy against communication cost.
//!
//! Run with: cargo run --example compare_algorithms

use datos::engine::{run, Algorithm, SolverConfig};
use datos::netgraph::{generate_erdos_renyi, GossipMatrix};
use datos::problems::{default_gamma_schedule, elastic_net};
use datos::refsolver::prox_grad_reference;

fn main() {
    let m = 20;
    let prob = elastic_net(11, m, 20, 50, 0.05, &default_gamma_schedule(m));
    let graph = generate_erdos_renyi(m, 0.5, 1).unwrap().graph;
    let w = GossipMatrix::metropolis(&graph, 1.0 / 3.0).unwrap();
    let reference = prox_grad_reference(&prob, 1e-12, 2_000_000).unwrap().reference_point();

    let cfg = SolverConfig { k_max: 1500, ..SolverConfig::default() };
    let algos = [
        ("datos", Algorithm::Datos),
        ("local_datos", Algorithm::LocalDatos { forced_global_min: false }),
        ("pg_extra", Algorithm::PgExtra { alpha: 0.02 }),
    ];

    println!(
        "{:>12} {:>12} {:>12} {:>10} {:>9} {:>10}",
        "algorithm", "gap", "consensus", "vec msgs", "scalar", "broadcast"
    );
    for (name, algo) in algos {
        let trace = run(&prob, &w, algo, &cfg, Some(&reference)).unwrap();
        let last = trace.rows.last().unwrap();
        println!(
            "{:>12} {:>12.4e} {:>12.4e} {:>10} {:>9} {:>10}",
            name,
            last.gap_surrogate.unwrap(),
            last.consensus_err.unwrap(),
            trace.ledger.vector_msgs,
            trace.ledger.scalar_msgs,
            trace.ledger.broadcast_msgs
        );
    }
    println!(
        "\nThe neighbor-only variant trades the per-round min-broadcast for one \
         scalar exchange per edge and typically lands within a small factor of \
         the coordinated run."
    );
}
