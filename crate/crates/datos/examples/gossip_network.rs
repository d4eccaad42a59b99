//! Builds connected Erdős–Rényi topologies and inspects their gossip
//! matrices: Metropolis weights, lazy mixing, and the spectral quantities
//! that govern consensus speed.
//!
//! Run with: cargo run --example gossip_network

use datos::netgraph::{generate_erdos_renyi, second_eigenvalue, GossipMatrix};

fn main() {
    let m = 20;
    let c = 1.0 / 3.0;
    println!("{:>5} {:>6} {:>7} {:>9} {:>10}", "p", "edges", "diam", "lambda2", "redraws");
    for p in [0.1, 0.3, 0.5, 0.9] {
        let draw = generate_erdos_renyi(m, p, 7).expect("connected draw within the redraw cap");
        let g = draw.graph;
        let w = GossipMatrix::metropolis(&g, c).expect("c in (0, 1/2)");
        let lambda2 = second_eigenvalue(w.w_tilde());
        println!(
            "{:>5.1} {:>6} {:>7} {:>9.4} {:>10}",
            p,
            g.edges().len(),
            g.diameter(),
            lambda2,
            draw.redraws
        );
    }

    // The mixing matrix W = (1-c) I + c W~ is symmetric, doubly stochastic,
    // and positive definite; one gossip application averages towards
    // consensus without ever leaving the span of the neighbors.
    let draw = generate_erdos_renyi(6, 0.6, 1).unwrap();
    let w = GossipMatrix::metropolis(&draw.graph, c).unwrap();
    println!("\nW for a 6-node draw (rows sum to 1):");
    for row in w.w().rows() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("  [{}]", cells.join(", "));
    }
}
