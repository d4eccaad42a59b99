//! Decentralized composite convex optimization over simulated gossip networks.
//!
//! The crate implements adaptive-stepsize three-operator splitting solvers in
//! which every agent tunes its stepsize by local backtracking, coordinated by
//! either a global or a neighbor-only min-consensus protocol. It ships the
//! network engines, a lifted-recursion oracle used for equivalence testing, a
//! centralized adaptive Davis-Yin primitive, a PG-EXTRA baseline, the three
//! benchmark problem families, and the diagnostics needed to measure
//! convergence against high-accuracy reference solutions.
//!
//! See the `examples/` directory for one runnable program per capability; the
//! `datos` binary exposes `run`, `compare` and `validate` subcommands for
//! config-driven experiments.

pub mod config;
pub mod engine;
pub mod linalg;
pub mod metrics;
pub mod netgraph;
pub mod problems;
pub mod proxops;
pub mod refsolver;
pub mod stepsize;
pub mod validate;

pub use engine::{Algorithm, MessageLedger, RunTrace, SolverConfig, SolverState};
pub use netgraph::{GossipMatrix, NetworkGraph};
pub use problems::ProblemInstance;
pub use refsolver::SolveReport;
