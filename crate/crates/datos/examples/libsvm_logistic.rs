//! Sparse LIBSVM ingestion end to end: parse `label idx:val` rows, shard the
//! dataset across agents, and solve the resulting L1-regularized logistic
//! problem over a gossip network. The sample data is written inline so the
//! example is self-contained; point `read_libsvm` at a real file for actual
//! datasets.
//!
//! Run with: cargo run --example libsvm_logistic

use datos::engine::{run, Algorithm, SolverConfig};
use datos::netgraph::{generate_erdos_renyi, GossipMatrix};
use datos::problems::{logistic_l1, parse_libsvm, split_dataset, LabelRule};
use datos::refsolver::prox_grad_reference;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::fmt::Write as _;

fn main() {
    // Synthesize a small sparse dataset in LIBSVM text form: labels in {0, 1}
    // (mapped to ±1 by LabelRule::DigitParity), 1-based feature indices,
    // roughly half the entries omitted.
    let (n, d) = (120, 8);
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let plane: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() - 0.5).collect();
    let mut text = String::new();
    for _ in 0..n {
        let feats: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
        let score: f64 = feats.iter().zip(&plane).map(|(x, w)| x * w).sum();
        let noisy = if rng.gen::<f64>() < 0.1 { -score } else { score };
        let label = if noisy >= 0.0 { 1 } else { 0 };
        write!(text, "{label}").unwrap();
        for (j, v) in feats.iter().enumerate() {
            if rng.gen::<f64>() < 0.5 {
                write!(text, " {}:{v:.6}", j + 1).unwrap();
            }
        }
        text.push('\n');
    }

    let data = parse_libsvm(&text, d, usize::MAX, LabelRule::DigitParity).unwrap();
    println!("parsed {} rows of dimension {}", data.n(), d);

    let m = 6;
    let (shards, dropped) = split_dataset(&data, m);
    println!("split into {m} shards of {} rows ({dropped} dropped)", shards[0].n());

    let prob = logistic_l1(shards, 1e-3).unwrap();
    let reference = prox_grad_reference(&prob, 1e-12, 2_000_000).unwrap().reference_point();

    let graph = generate_erdos_renyi(m, 0.6, 2).unwrap().graph;
    let w = GossipMatrix::metropolis(&graph, 1.0 / 3.0).unwrap();
    let cfg = SolverConfig { k_max: 3000, stop: Some(1e-9), ..SolverConfig::default() };
    let trace = run(&prob, &w, Algorithm::Datos, &cfg, Some(&reference)).unwrap();
    let last = trace.rows.last().unwrap();
    println!(
        "solved to gap {:.3e} in {} rounds; reference weights: {:?}",
        last.gap_surrogate.unwrap(),
        last.k,
        reference.x_star.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
}
