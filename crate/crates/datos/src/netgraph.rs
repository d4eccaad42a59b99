//! Communication graphs and gossip matrices.
//!
//! A [`NetworkGraph`] is an undirected connected graph over `m` agents; a
//! [`GossipMatrix`] pairs a symmetric doubly stochastic base matrix compliant
//! with the graph with its lazy mixture `W = (1-c) I + c W~`, `c in (0, 1/2)`,
//! which keeps the smallest eigenvalue of `W` strictly positive.

use std::collections::BTreeSet;
use std::collections::VecDeque;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::linalg::sym_eig;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge probability {p} too small for m={m}: still disconnected after {attempts} redraws")]
    DisconnectedAfterRedraws { m: usize, p: f64, attempts: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed edge list at line {line}: {reason}")]
    MalformedEdgeList { line: usize, reason: String },
}

/// Undirected connected communication graph.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    m: usize,
    edges: BTreeSet<(usize, usize)>,
    degrees: Vec<usize>,
    diameter: usize,
}

impl NetworkGraph {
    /// Builds a graph from unordered agent pairs, validating connectivity.
    pub fn new(m: usize, edge_iter: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if m == 0 {
            return Err(GraphError::InvalidParameter("agent count must be positive".into()));
        }
        let mut edges = BTreeSet::new();
        for (i, j) in edge_iter {
            if i == j {
                return Err(GraphError::InvalidParameter(format!("self-loop at agent {i}")));
            }
            if i >= m || j >= m {
                return Err(GraphError::InvalidParameter(format!(
                    "edge ({i},{j}) out of range for m={m}"
                )));
            }
            edges.insert((i.min(j), i.max(j)));
        }
        let mut degrees = vec![0usize; m];
        for &(i, j) in &edges {
            degrees[i] += 1;
            degrees[j] += 1;
        }
        let graph = Self { m, edges, degrees, diameter: 0 };
        let diameter = graph
            .try_diameter()
            .ok_or_else(|| GraphError::InvalidParameter("graph is disconnected".into()))?;
        Ok(Self { diameter, ..graph })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    /// Exact hop diameter (all-pairs BFS); 0 iff `m == 1`.
    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.m).filter(|&j| self.has_edge(i, j)).collect()
    }

    fn try_diameter(&self) -> Option<usize> {
        let mut diameter = 0;
        for src in 0..self.m {
            let dist = self.bfs(src);
            for d in &dist {
                match d {
                    Some(d) => diameter = diameter.max(*d),
                    None => return None,
                }
            }
            if src == 0 && dist.iter().any(|d| d.is_none()) {
                return None;
            }
        }
        Some(diameter)
    }

    fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.m];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap();
            for v in 0..self.m {
                if self.has_edge(u, v) && dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Edge-list text serialization: header `m=<int>`, then one `i j` pair per
    /// line, 0-based.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "m={}", self.m).unwrap();
        for &(i, j) in &self.edges {
            writeln!(out, "{i} {j}").unwrap();
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| GraphError::MalformedEdgeList { line: 1, reason: "empty input".into() })?;
        let m: usize = header
            .trim()
            .strip_prefix("m=")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| GraphError::MalformedEdgeList {
                line: 1,
                reason: format!("expected header `m=<int>`, got `{header}`"),
            })?;
        let mut edges = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |s: Option<&str>| -> Option<usize> { s.and_then(|s| s.parse().ok()) };
            match (parse(parts.next()), parse(parts.next())) {
                (Some(i), Some(j)) => edges.push((i, j)),
                _ => {
                    return Err(GraphError::MalformedEdgeList {
                        line: idx + 1,
                        reason: format!("expected `i j`, got `{line}`"),
                    })
                }
            }
        }
        Self::new(m, edges)
    }
}

/// Result of a seeded Erdos-Renyi draw, including how many redraws were needed
/// to hit a connected graph.
#[derive(Debug, Clone)]
pub struct ErdosRenyiDraw {
    pub graph: NetworkGraph,
    pub redraws: usize,
}

pub const DEFAULT_REDRAW_CAP: usize = 10_000;

/// Draws a connected Erdos-Renyi graph: each unordered pair is included
/// independently with probability `p`. Disconnected draws are retried with an
/// incremented sub-seed, so the result is a pure function of `(m, p, seed)`.
pub fn generate_erdos_renyi(m: usize, p: f64, seed: u64) -> Result<ErdosRenyiDraw, GraphError> {
    generate_erdos_renyi_capped(m, p, seed, DEFAULT_REDRAW_CAP)
}

pub fn generate_erdos_renyi_capped(
    m: usize,
    p: f64,
    seed: u64,
    redraw_cap: usize,
) -> Result<ErdosRenyiDraw, GraphError> {
    if m == 0 {
        return Err(GraphError::InvalidParameter("agent count must be positive".into()));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(GraphError::InvalidParameter(format!("edge probability {p} not in (0, 1]")));
    }
    for attempt in 0..=redraw_cap {
        let mut rng = ChaCha20Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
        let mut edges = Vec::new();
        for i in 0..m {
            for j in (i + 1)..m {
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        if let Ok(graph) = NetworkGraph::new(m, edges) {
            return Ok(ErdosRenyiDraw { graph, redraws: attempt });
        }
    }
    Err(GraphError::DisconnectedAfterRedraws { m, p, attempts: redraw_cap })
}

/// Metropolis-Hastings base weights: `W~_ij = 1 / (1 + max(deg_i, deg_j))` on
/// edges, diagonal chosen so rows sum to one.
pub fn metropolis_weights(g: &NetworkGraph) -> Array2<f64> {
    let m = g.m();
    let mut w = Array2::zeros((m, m));
    for &(i, j) in g.edges() {
        let wij = 1.0 / (1.0 + g.degree(i).max(g.degree(j)) as f64);
        w[[i, j]] = wij;
        w[[j, i]] = wij;
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| w[[i, j]]).sum();
        w[[i, i]] = 1.0 - off;
    }
    w
}

/// Second-largest eigenvalue of a symmetric stochastic matrix; equals 1 iff
/// the underlying graph is disconnected. Defined as 1 for `m = 1`.
pub fn second_eigenvalue(w_tilde: ArrayView2<'_, f64>) -> f64 {
    if w_tilde.nrows() <= 1 {
        return 1.0;
    }
    let (vals, _) = sym_eig(&w_tilde.to_owned());
    vals[1]
}

/// Symmetric doubly stochastic gossip matrix with its lazy mixture.
#[derive(Debug, Clone)]
pub struct GossipMatrix {
    w_tilde: Array2<f64>,
    c: f64,
    w: Array2<f64>,
}

impl GossipMatrix {
    /// `W = (1-c) I + c W~`, rejecting `c` outside the open interval (0, 1/2).
    pub fn lazy_mix(w_tilde: Array2<f64>, c: f64) -> Result<Self, GraphError> {
        if !(c > 0.0 && c < 0.5) {
            return Err(GraphError::InvalidParameter(format!("mixing parameter c={c} not in (0, 1/2)")));
        }
        let m = w_tilde.nrows();
        if w_tilde.ncols() != m {
            return Err(GraphError::InvalidParameter("base matrix must be square".into()));
        }
        let mut w = &w_tilde * c;
        for i in 0..m {
            w[[i, i]] += 1.0 - c;
        }
        Ok(Self { w_tilde, c, w })
    }

    /// Metropolis weights for `g` mixed with parameter `c`.
    pub fn metropolis(g: &NetworkGraph, c: f64) -> Result<Self, GraphError> {
        Self::lazy_mix(metropolis_weights(g), c)
    }

    pub fn m(&self) -> usize {
        self.w.nrows()
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn w_tilde(&self) -> ArrayView2<'_, f64> {
        self.w_tilde.view()
    }

    pub fn w(&self) -> ArrayView2<'_, f64> {
        self.w.view()
    }
}
