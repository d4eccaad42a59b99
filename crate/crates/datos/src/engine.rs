//! Solver iteration engines over a synchronous simulated gossip network.
//!
//! One round is a barrier-synchronized superstep: per-agent work (gradient,
//! line search, prox) is logically concurrent but executed in ascending agent
//! index so runs are bitwise deterministic. Gossip multiplications and
//! min-reductions are the only communication events and every one of them is
//! charged to a [`MessageLedger`].

use std::collections::BTreeSet;
use std::io;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::sym_sqrt_clipped;
use crate::metrics::{consensus_error, optimality_gap, ReferencePoint};
use crate::netgraph::GossipMatrix;
use crate::problems::{AggregateSmooth, ProblemInstance, Smooth};
use crate::proxops::{aggregate_prox_spec, prox_rowwise, ProxError, ProxSpec};
use crate::stepsize::{
    candidate_alpha_global, candidate_alpha_local, linesearch, BudgetRule, BudgetState,
    LineSearchError, LineSearchParams,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("line search failed for agent {agent} at round {round}: {source}")]
    LineSearch {
        round: usize,
        agent: usize,
        #[source]
        source: LineSearchError,
    },
    #[error("prox failed at round {round}: {source}")]
    Prox {
        round: usize,
        #[source]
        source: ProxError,
    },
    #[error("centralized splitting needs an aggregate prox: {0}")]
    Aggregate(String),
}

/// Communication totals. A vector message is one d-dimensional transmission
/// over one edge in one direction; a broadcast is one network-wide scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MessageLedger {
    pub vector_msgs: u64,
    pub scalar_msgs: u64,
    pub broadcast_msgs: u64,
}

impl MessageLedger {
    pub fn delta(self, earlier: MessageLedger) -> MessageLedger {
        MessageLedger {
            vector_msgs: self.vector_msgs - earlier.vector_msgs,
            scalar_msgs: self.scalar_msgs - earlier.scalar_msgs,
            broadcast_msgs: self.broadcast_msgs - earlier.broadcast_msgs,
        }
    }
}

/// Which solver loop `run` drives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Datos,
    LocalDatos { forced_global_min: bool },
    AdaptiveDys,
    PgExtra { alpha: f64 },
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Initial stepsize, uniform across agents.
    pub alpha_init: f64,
    pub delta: f64,
    pub eta: f64,
    pub max_trials: usize,
    pub slack: f64,
    pub budget: BudgetRule,
    pub k_max: usize,
    /// Stop when consensus error plus gap surrogate falls below this (both
    /// must be computable, i.e. a reference point is present).
    pub stop: Option<f64>,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha_init: 10.0,
            delta: 0.9,
            eta: 0.5,
            max_trials: 60,
            slack: 1e-12,
            budget: BudgetRule::Fixed { beta: 1.0, p: 2.0 },
            k_max: 1000,
            stop: None,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn linesearch_params(&self) -> LineSearchParams {
        LineSearchParams {
            eta: self.eta,
            delta: self.delta,
            max_trials: self.max_trials,
            slack: self.slack,
        }
    }
}

/// Stacked per-agent state of the network algorithms (rows are agents).
#[derive(Debug, Clone)]
pub struct SolverState {
    pub x: Array2<f64>,
    pub s: Array2<f64>,
    pub d: Array2<f64>,
    pub t: Array2<f64>,
    pub a: Array2<f64>,
    pub x_prev: Array2<f64>,
    /// Initial dual block, referenced by the global stepsize candidate.
    pub s0: Array2<f64>,
    pub alphas: Vec<f64>,
    pub k: usize,
}

impl SolverState {
    /// Standard-normal X and S (seeded), zeros elsewhere, uniform stepsize.
    pub fn init(m: usize, d: usize, alpha_init: f64, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((m, d), |_| rng.sample::<f64, _>(StandardNormal));
        let s = Array2::from_shape_fn((m, d), |_| rng.sample::<f64, _>(StandardNormal));
        Self::from_parts(x, s, alpha_init)
    }

    /// Seeded start with X projected into the domain of the nonsmooth terms
    /// (row-wise unit-stepsize prox), so indicator-constrained problems never
    /// see an infeasible first gradient evaluation.
    pub fn init_for(prob: &ProblemInstance, alpha_init: f64, seed: u64) -> Self {
        let mut state = Self::init(prob.m(), prob.d(), alpha_init, seed);
        state.x = prox_rowwise(state.x.view(), &vec![1.0; prob.m()], prob.prox_specs())
            .expect("unit stepsize is positive");
        state
    }

    pub fn from_parts(x: Array2<f64>, s: Array2<f64>, alpha_init: f64) -> Self {
        assert!(alpha_init > 0.0);
        let (m, d) = x.dim();
        assert_eq!(s.dim(), (m, d));
        Self {
            x,
            s0: s.clone(),
            s,
            d: Array2::zeros((m, d)),
            t: Array2::zeros((m, d)),
            a: Array2::zeros((m, d)),
            x_prev: Array2::zeros((m, d)),
            alphas: vec![alpha_init; m],
            k: 0,
        }
    }
}

/// Per-round diagnostics returned by the round functions.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub alphas: Vec<f64>,
    pub ls_trials: Vec<usize>,
    pub budget_used: f64,
}

/// Number of undirected communication edges in the gossip structure.
pub fn edge_count(w: &GossipMatrix) -> u64 {
    let wt = w.w_tilde();
    let m = w.m();
    let mut e = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            if wt[[i, j]] != 0.0 {
                e += 1;
            }
        }
    }
    e
}

/// Structurally edge-only multiplication by W: row `i` combines the agent's
/// own row with its neighbors' rows only, and every accessed unordered pair is
/// recorded in `touched` when present.
fn sparse_multiply(
    w: &GossipMatrix,
    x: ArrayView2<'_, f64>,
    mut touched: Option<&mut BTreeSet<(usize, usize)>>,
) -> Array2<f64> {
    let wt = w.w_tilde();
    let wm = w.w();
    let m = w.m();
    let mut out = Array2::zeros(x.raw_dim());
    for i in 0..m {
        let mut row = x.row(i).to_owned() * wm[[i, i]];
        for j in 0..m {
            if j != i && wt[[i, j]] != 0.0 {
                row.scaled_add(wm[[i, j]], &x.row(j));
                if let Some(t) = touched.as_deref_mut() {
                    t.insert((i.min(j), i.max(j)));
                }
            }
        }
        out.row_mut(i).assign(&row);
    }
    out
}

/// One gossip exchange: every edge carries one vector message per direction.
pub fn gossip_apply(
    w: &GossipMatrix,
    x: ArrayView2<'_, f64>,
    ledger: &mut MessageLedger,
    touched: Option<&mut BTreeSet<(usize, usize)>>,
) -> Array2<f64> {
    ledger.vector_msgs += 2 * edge_count(w);
    sparse_multiply(w, x, touched)
}

/// Globally coordinated round: gossip on X and on the dual-tracking block,
/// per-agent candidate stepsize + line search, an exact network-wide
/// min-reduction (m scalar broadcasts), then the primal/dual/tracking updates
/// under the shared stepsize.
pub fn datos_round(
    state: &mut SolverState,
    prob: &ProblemInstance,
    w: &GossipMatrix,
    cfg: &SolverConfig,
    budget: &mut BudgetState,
    ledger: &mut MessageLedger,
    mut touched: Option<&mut BTreeSet<(usize, usize)>>,
) -> Result<RoundReport, EngineError> {
    let m = prob.m();
    let params = cfg.linesearch_params();
    let grad = prob.grad_stacked(state.x.view());
    let x_half = gossip_apply(w, state.x.view(), ledger, touched.as_deref_mut());
    let d_half = gossip_apply(w, (&grad + &state.s + &state.d).view(), ledger, touched);

    let n_k = budget.next(state.alphas[0]);
    let mut alphas = Vec::with_capacity(m);
    let mut trials = Vec::with_capacity(m);
    for i in 0..m {
        let tilde = candidate_alpha_global(
            state.alphas[i],
            state.a.row(i),
            state.x_prev.row(i),
            state.s.row(i),
            state.s0.row(i),
            state.t.row(i),
            w.c(),
            cfg.delta,
            n_k,
        );
        let dir = -&d_half.row(i);
        let (alpha_i, tr) =
            linesearch(tilde, state.x.row(i), x_half.row(i), dir.view(), prob.smooth(i), &params)
                .map_err(|source| EngineError::LineSearch { round: state.k, agent: i, source })?;
        alphas.push(alpha_i);
        trials.push(tr);
    }

    let alpha = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
    ledger.broadcast_msgs += m as u64;

    let a_next = &x_half - &(alpha * &d_half);
    let x_next = prox_rowwise((&a_next + &(alpha * &state.s)).view(), &vec![alpha; m], prob.prox_specs())
        .map_err(|source| EngineError::Prox { round: state.k, source })?;
    let s_next = &state.s + &((&a_next - &x_next) / alpha);
    let d_next = &d_half - &grad - &state.s + &((&state.x - &x_half) / alpha);
    let t_next = &state.t - &state.s - &state.d - &grad + &(&state.x / alpha);

    state.x_prev = std::mem::replace(&mut state.x, x_next);
    state.s = s_next;
    state.d = d_next;
    state.t = t_next;
    state.a = a_next;
    state.alphas = vec![alpha; m];
    state.k += 1;
    Ok(RoundReport { alphas: state.alphas.clone(), ls_trials: trials, budget_used: n_k })
}

/// Neighbor-only round: per-agent budgets and candidates, min-reduction over
/// closed neighborhoods via one scalar exchange per edge, zero broadcasts.
/// With `forced_global_min` the round reproduces the coordinated variant
/// exactly (global candidate + global min + tracking update) while still
/// applying the per-row update equations of this variant.
#[allow(clippy::too_many_arguments)]
pub fn local_datos_round(
    state: &mut SolverState,
    prob: &ProblemInstance,
    w: &GossipMatrix,
    cfg: &SolverConfig,
    budgets: &mut [BudgetState],
    forced_global_min: bool,
    ledger: &mut MessageLedger,
    mut touched: Option<&mut BTreeSet<(usize, usize)>>,
) -> Result<RoundReport, EngineError> {
    let m = prob.m();
    assert_eq!(budgets.len(), if forced_global_min { 1 } else { m });
    let params = cfg.linesearch_params();
    let wt = w.w_tilde();
    let grad = prob.grad_stacked(state.x.view());
    let x_half = gossip_apply(w, state.x.view(), ledger, touched.as_deref_mut());
    let d_half = gossip_apply(w, (&grad + &state.s + &state.d).view(), ledger, touched.as_deref_mut());

    let mut candidates = Vec::with_capacity(m);
    let mut trials = Vec::with_capacity(m);
    let mut budget_used = 0.0f64;
    for i in 0..m {
        let tilde = if forced_global_min {
            if i == 0 {
                budget_used = budgets[0].next(state.alphas[0]);
            }
            candidate_alpha_global(
                state.alphas[i],
                state.a.row(i),
                state.x_prev.row(i),
                state.s.row(i),
                state.s0.row(i),
                state.t.row(i),
                w.c(),
                cfg.delta,
                budget_used,
            )
        } else {
            let m_k = budgets[i].next(state.alphas[i]);
            budget_used = budget_used.max(m_k);
            candidate_alpha_local(state.alphas[i], m_k)
        };
        let dir = -&d_half.row(i);
        let (alpha_i, tr) =
            linesearch(tilde, state.x.row(i), x_half.row(i), dir.view(), prob.smooth(i), &params)
                .map_err(|source| EngineError::LineSearch { round: state.k, agent: i, source })?;
        candidates.push(alpha_i);
        trials.push(tr);
    }

    let alphas: Vec<f64> = if forced_global_min {
        let alpha = candidates.iter().cloned().fold(f64::INFINITY, f64::min);
        vec![alpha; m]
    } else {
        ledger.scalar_msgs += edge_count(w);
        (0..m)
            .map(|i| {
                let mut a = candidates[i];
                for j in 0..m {
                    if j != i && wt[[i, j]] != 0.0 {
                        a = a.min(candidates[j]);
                    }
                }
                a
            })
            .collect()
    };

    // D_Lambda = (I - W) Lambda^{-1} X, assembled from data the neighbors
    // already hold (x_j from the first gossip, alpha_j from the scalar
    // exchange), so it carries no additional messages.
    let mut x_scaled = state.x.clone();
    for i in 0..m {
        x_scaled.row_mut(i).mapv_inplace(|v| v / alphas[i]);
    }
    let d_lambda = &x_scaled - &sparse_multiply(w, x_scaled.view(), touched);

    let mut a_next = x_half.clone();
    for i in 0..m {
        let scaled = &d_half.row(i) * alphas[i];
        a_next.row_mut(i).zip_mut_with(&scaled, |a, &d| *a -= d);
    }
    let mut arg = a_next.clone();
    for i in 0..m {
        let scaled = &state.s.row(i) * alphas[i];
        arg.row_mut(i).zip_mut_with(&scaled, |a, &s| *a += s);
    }
    let x_next = prox_rowwise(arg.view(), &alphas, prob.prox_specs())
        .map_err(|source| EngineError::Prox { round: state.k, source })?;
    let mut s_next = state.s.clone();
    for i in 0..m {
        let inc = (&a_next.row(i) - &x_next.row(i)) / alphas[i];
        s_next.row_mut(i).zip_mut_with(&inc, |s, &v| *s += v);
    }
    let d_next = &d_half + &d_lambda - &grad - &state.s;
    if forced_global_min {
        state.t = &state.t - &state.s - &state.d - &grad + &(&state.x / alphas[0]);
    }

    state.x_prev = std::mem::replace(&mut state.x, x_next);
    state.s = s_next;
    state.d = d_next;
    state.a = a_next;
    state.alphas = alphas;
    state.k += 1;
    Ok(RoundReport { alphas: state.alphas.clone(), ls_trials: trials, budget_used })
}

/// Dense primal-dual recursion over the lifted variables, used as an
/// independent oracle for the network recursion. `L^2 = I - W`, `M^2 = W`, and
/// the network's D block is identified with `L Y`.
#[derive(Debug, Clone)]
pub struct LiftedState {
    pub x: Array2<f64>,
    pub s: Array2<f64>,
    pub a: Array2<f64>,
    pub xt: Array2<f64>,
    pub st: Array2<f64>,
    pub at: Array2<f64>,
    pub y: Array2<f64>,
    pub l_mat: Array2<f64>,
    pub m_mat: Array2<f64>,
}

impl LiftedState {
    pub fn init(w: &GossipMatrix, x0: Array2<f64>, s0: Array2<f64>) -> Self {
        let m = w.m();
        assert_eq!(x0.nrows(), m);
        let wm = w.w().to_owned();
        let l_mat = sym_sqrt_clipped(&(Array2::eye(m) - &wm));
        let m_mat = sym_sqrt_clipped(&wm);
        let d = x0.ncols();
        Self {
            x: x0,
            s: s0,
            a: Array2::zeros((m, d)),
            xt: Array2::zeros((m, d)),
            st: Array2::zeros((m, d)),
            at: Array2::zeros((m, d)),
            y: Array2::zeros((m, d)),
            l_mat,
            m_mat,
        }
    }

    /// The network algorithm's dual-tracking block in lifted coordinates.
    pub fn d_block(&self) -> Array2<f64> {
        self.l_mat.dot(&self.y)
    }
}

/// One lifted round under an externally supplied stepsize (e.g. the sequence
/// the network engine actually selected).
pub fn lifted_round(
    state: &mut LiftedState,
    prob: &ProblemInstance,
    alpha: f64,
) -> Result<(), EngineError> {
    assert!(alpha > 0.0);
    let m = prob.m();
    let grad = prob.grad_stacked(state.x.view());
    let inner = &state.x - &(alpha * &state.s) - &(alpha * state.l_mat.dot(&state.y)) - &(alpha * &grad);
    let y_next = &state.y + &(state.l_mat.dot(&inner) / alpha);
    let a_next = &state.x - &(alpha * &state.s) - &(alpha * &grad) - &(alpha * state.l_mat.dot(&y_next));
    let at_next = alpha * state.m_mat.dot(&state.y) - alpha * state.m_mat.dot(&y_next);
    let x_next =
        prox_rowwise((&a_next + &(alpha * &state.s)).view(), &vec![alpha; m], prob.prox_specs())
            .map_err(|source| EngineError::Prox { round: 0, source })?;
    let s_next = &state.s + &((&a_next - &x_next) / alpha);
    // Slack primal block projects to zero, so its dual keeps St = -M Y.
    let st_next = &state.st + &((&at_next - Array2::<f64>::zeros(at_next.raw_dim())) / alpha);

    state.x = x_next;
    state.s = s_next;
    state.a = a_next;
    state.at = at_next;
    state.xt = Array2::zeros(state.xt.raw_dim());
    state.st = st_next;
    state.y = y_next;
    Ok(())
}

/// Centralized adaptive three-operator splitting (the network algorithms are
/// the decentralized instantiation of this loop).
pub struct AdaptiveDys<'a> {
    f: &'a dyn Smooth,
    r1: &'a ProxSpec,
    r2: &'a ProxSpec,
    params: LineSearchParams,
    delta: f64,
    budget: BudgetState,
    pub x: Array1<f64>,
    pub s: Array1<f64>,
    s0: Array1<f64>,
    x_prev: Array1<f64>,
    a_prev: Array1<f64>,
    pub alpha: f64,
    pub k: usize,
    pub last_trials: usize,
}

impl<'a> AdaptiveDys<'a> {
    pub fn new(
        x0: Array1<f64>,
        s0: Array1<f64>,
        f: &'a dyn Smooth,
        r1: &'a ProxSpec,
        r2: &'a ProxSpec,
        params: LineSearchParams,
        budget_rule: BudgetRule,
        alpha_init: f64,
    ) -> Self {
        let delta = params.delta;
        Self {
            f,
            r1,
            r2,
            params,
            delta,
            budget: BudgetState::new(budget_rule, alpha_init),
            x_prev: x0.clone(),
            a_prev: Array1::zeros(x0.len()),
            x: x0,
            s0: s0.clone(),
            s: s0,
            alpha: alpha_init,
            k: 0,
            last_trials: 0,
        }
    }

    /// One iteration: backtrack the stepsize on the curvature test between x
    /// and the first resolvent point a, then apply the two-prox update.
    pub fn step(&mut self) -> Result<(), EngineError> {
        let n_k = self.budget.next(self.alpha);
        let num = (1.0 - self.delta) / 4.0 * sq(&(&self.a_prev - &self.x_prev));
        let den = sq(&(&self.s - &self.s0));
        let ratio = if den == 0.0 { f64::INFINITY } else { num / den };
        let mut alpha = (self.alpha * self.alpha + ratio.min(n_k)).sqrt();

        let fx = self.f.value(self.x.view());
        let g = self.f.grad(self.x.view());
        let slack = self.params.slack * (1.0 + fx.abs());
        let mut accepted = None;
        for trial in 1..=self.params.max_trials {
            let v = &self.x - &(alpha * &self.s) - &(alpha * &g);
            let a = self.r2.prox(v.view(), alpha).map_err(|source| EngineError::Prox {
                round: self.k,
                source,
            })?;
            let step = &a - &self.x;
            let fa = self.f.value(a.view());
            if fa <= fx + g.dot(&step) + self.delta / (2.0 * alpha) * step.dot(&step) + slack {
                accepted = Some((a, trial));
                break;
            }
            alpha *= self.params.eta;
        }
        let (a, trials) = accepted.ok_or(EngineError::LineSearch {
            round: self.k,
            agent: 0,
            source: LineSearchError::TrialsExhausted { alpha, trials: self.params.max_trials },
        })?;

        let x_next = self
            .r1
            .prox((&a + &(alpha * &self.s)).view(), alpha)
            .map_err(|source| EngineError::Prox { round: self.k, source })?;
        let s_next = &self.s + &((&a - &x_next) / alpha);

        self.x_prev = std::mem::replace(&mut self.x, x_next);
        self.a_prev = a;
        self.s = s_next;
        self.alpha = alpha;
        self.last_trials = trials;
        self.k += 1;
        Ok(())
    }
}

fn sq(v: &Array1<f64>) -> f64 {
    v.dot(v)
}

/// PG-EXTRA with a fixed stepsize, the conservative-stepsize baseline.
#[derive(Debug, Clone)]
pub struct PgExtraState {
    pub x: Array2<f64>,
    x_prev: Array2<f64>,
    z: Array2<f64>,
    grad_prev: Array2<f64>,
    wx_prev: Array2<f64>,
    pub k: usize,
}

impl PgExtraState {
    pub fn init(x0: Array2<f64>) -> Self {
        let dim = x0.raw_dim();
        Self {
            x: x0,
            x_prev: Array2::zeros(dim),
            z: Array2::zeros(dim),
            grad_prev: Array2::zeros(dim),
            wx_prev: Array2::zeros(dim),
            k: 0,
        }
    }
}

pub fn pg_extra_round(
    state: &mut PgExtraState,
    prob: &ProblemInstance,
    w: &GossipMatrix,
    alpha: f64,
    ledger: &mut MessageLedger,
    touched: Option<&mut BTreeSet<(usize, usize)>>,
) -> Result<(), EngineError> {
    assert!(alpha > 0.0);
    let m = prob.m();
    let grad = prob.grad_stacked(state.x.view());
    let wx = gossip_apply(w, state.x.view(), ledger, touched);
    let z_next = if state.k == 0 {
        &wx - &(alpha * &grad)
    } else {
        // W-bar = (I + W)/2 applied to the previous iterate, reusing the
        // previous round's gossip result.
        let wbar_prev = (&state.x_prev + &state.wx_prev) / 2.0;
        &state.z + &wx - &wbar_prev - &(alpha * (&grad - &state.grad_prev))
    };
    let x_next = prox_rowwise(z_next.view(), &vec![alpha; m], prob.prox_specs())
        .map_err(|source| EngineError::Prox { round: state.k, source })?;

    state.x_prev = std::mem::replace(&mut state.x, x_next);
    state.z = z_next;
    state.grad_prev = grad;
    state.wx_prev = wx;
    state.k += 1;
    Ok(())
}

/// One emitted trace record. Message columns are per-round deltas.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub ls_trials_total: u64,
    pub gap_surrogate: Option<f64>,
    pub consensus_err: Option<f64>,
    pub support_size: Option<usize>,
    pub vec_msgs: u64,
    pub scalar_msgs: u64,
    pub broadcast_msgs: u64,
}

/// Full record of one run: per-round rows, the echoed configuration, and the
/// final iterates.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub config_echo: Vec<String>,
    pub final_x: Array2<f64>,
    pub final_s: Array2<f64>,
    pub final_alphas: Vec<f64>,
    pub ledger: MessageLedger,
}

impl RunTrace {
    pub const CSV_HEADER: &'static str = "k,alpha_min,alpha_max,ls_trials_total,gap_surrogate,consensus_err,support_size,vec_msgs,scalar_msgs,broadcast_msgs";

    pub fn write_csv(&self, out: &mut dyn io::Write) -> io::Result<()> {
        for line in &self.config_echo {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            let opt = |v: Option<f64>| v.map(|v| format!("{v:.17e}")).unwrap_or_default();
            let opt_usize = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{:.17e},{:.17e},{},{},{},{},{},{},{}",
                r.k,
                r.alpha_min,
                r.alpha_max,
                r.ls_trials_total,
                opt(r.gap_surrogate),
                opt(r.consensus_err),
                opt_usize(r.support_size),
                r.vec_msgs,
                r.scalar_msgs,
                r.broadcast_msgs
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }
}

fn support_size_of_mean(x: &Array2<f64>, reference: &ReferencePoint) -> usize {
    let mean = x.mean_axis(Axis(0)).unwrap();
    let tol = 1e-9 * (1.0 + reference.x_star.iter().fold(0.0f64, |a, &v| a.max(v.abs())));
    mean.iter().filter(|v| v.abs() > tol).count()
}

/// Drives `k_max` rounds (or until the stop tolerance) of the selected
/// algorithm and records one trace row per round plus the initial row.
/// Deterministic for a fixed configuration.
pub fn run(
    prob: &ProblemInstance,
    w: &GossipMatrix,
    algo: Algorithm,
    cfg: &SolverConfig,
    reference: Option<&ReferencePoint>,
) -> Result<RunTrace, EngineError> {
    assert!(cfg.delta > 0.0 && cfg.delta < 1.0);
    assert!(cfg.eta > 0.0 && cfg.eta < 1.0);
    let m = prob.m();
    let has_l1 = matches!(prob.prox_specs()[0], ProxSpec::L1 { .. });
    let mut ledger = MessageLedger::default();
    let mut rows = Vec::with_capacity(cfg.k_max + 1);

    let record = |k: usize,
                      alphas: &[f64],
                      trials: u64,
                      x: &Array2<f64>,
                      delta: MessageLedger,
                      rows: &mut Vec<TraceRow>| {
        let gap = reference.map(|r| optimality_gap(x.view(), prob, r));
        let cons = Some(consensus_error(x.view()));
        let supp = if has_l1 { reference.map(|r| support_size_of_mean(x, r)) } else { None };
        rows.push(TraceRow {
            k,
            alpha_min: alphas.iter().cloned().fold(f64::INFINITY, f64::min),
            alpha_max: alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            ls_trials_total: trials,
            gap_surrogate: gap,
            consensus_err: cons,
            support_size: supp,
            vec_msgs: delta.vector_msgs,
            scalar_msgs: delta.scalar_msgs,
            broadcast_msgs: delta.broadcast_msgs,
        });
        (gap, cons)
    };

    let should_stop = |gap: Option<f64>, cons: Option<f64>| match (cfg.stop, gap, cons) {
        (Some(tol), Some(g), Some(c)) => g + c < tol,
        _ => false,
    };

    match algo {
        Algorithm::Datos | Algorithm::LocalDatos { .. } => {
            let mut state = SolverState::init_for(prob, cfg.alpha_init, cfg.seed);
            let forced = matches!(algo, Algorithm::LocalDatos { forced_global_min: true });
            let mut budgets = match algo {
                Algorithm::Datos => vec![BudgetState::new(cfg.budget.clone(), cfg.alpha_init)],
                Algorithm::LocalDatos { forced_global_min } => {
                    let n = if forced_global_min { 1 } else { m };
                    vec![BudgetState::new(cfg.budget.clone(), cfg.alpha_init); n]
                }
                _ => unreachable!(),
            };
            record(0, &state.alphas, 0, &state.x, MessageLedger::default(), &mut rows);
            for _ in 0..cfg.k_max {
                let before = ledger;
                let report = match algo {
                    Algorithm::Datos => datos_round(
                        &mut state,
                        prob,
                        w,
                        cfg,
                        &mut budgets[0],
                        &mut ledger,
                        None,
                    )?,
                    _ => local_datos_round(
                        &mut state,
                        prob,
                        w,
                        cfg,
                        &mut budgets,
                        forced,
                        &mut ledger,
                        None,
                    )?,
                };
                let trials: u64 = report.ls_trials.iter().map(|&t| t as u64).sum();
                let (gap, cons) =
                    record(state.k, &state.alphas, trials, &state.x, ledger.delta(before), &mut rows);
                if should_stop(gap, cons) {
                    break;
                }
            }
            Ok(RunTrace {
                rows,
                config_echo: Vec::new(),
                final_x: state.x,
                final_s: state.s,
                final_alphas: state.alphas,
                ledger,
            })
        }
        Algorithm::PgExtra { alpha } => {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            let x0 = Array2::from_shape_fn((m, prob.d()), |_| rng.sample::<f64, _>(StandardNormal));
            let x0 = prox_rowwise(x0.view(), &vec![1.0; m], prob.prox_specs())
                .map_err(|source| EngineError::Prox { round: 0, source })?;
            let mut state = PgExtraState::init(x0);
            record(0, &[alpha], 0, &state.x, MessageLedger::default(), &mut rows);
            for _ in 0..cfg.k_max {
                let before = ledger;
                pg_extra_round(&mut state, prob, w, alpha, &mut ledger, None)?;
                let (gap, cons) =
                    record(state.k, &[alpha], 0, &state.x, ledger.delta(before), &mut rows);
                if should_stop(gap, cons) {
                    break;
                }
            }
            Ok(RunTrace {
                rows,
                config_echo: Vec::new(),
                final_s: Array2::zeros(state.x.raw_dim()),
                final_x: state.x,
                final_alphas: vec![alpha],
                ledger,
            })
        }
        Algorithm::AdaptiveDys => {
            let r1 = aggregate_prox_spec(prob.prox_specs()).map_err(EngineError::Aggregate)?;
            let f = AggregateSmooth(prob);
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            let x0 = Array1::from_iter((0..prob.d()).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let x0 = r1.prox(x0.view(), 1.0).map_err(|source| EngineError::Prox { round: 0, source })?;
            let s0 = Array1::from_iter((0..prob.d()).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let r2 = ProxSpec::Zero;
            let mut solver = AdaptiveDys::new(
                x0,
                s0,
                &f,
                &r1,
                &r2,
                cfg.linesearch_params(),
                cfg.budget.clone(),
                cfg.alpha_init,
            );
            let as_matrix = |x: &Array1<f64>| {
                Array2::from_shape_fn((1, x.len()), |(_, j)| x[j])
            };
            record(0, &[solver.alpha], 0, &as_matrix(&solver.x), MessageLedger::default(), &mut rows);
            for _ in 0..cfg.k_max {
                solver.step()?;
                let xm = as_matrix(&solver.x);
                let (gap, cons) = record(
                    solver.k,
                    &[solver.alpha],
                    solver.last_trials as u64,
                    &xm,
                    MessageLedger::default(),
                    &mut rows,
                );
                if should_stop(gap, cons) {
                    break;
                }
            }
            let final_x = as_matrix(&solver.x);
            let final_s = as_matrix(&solver.s);
            Ok(RunTrace {
                rows,
                config_echo: Vec::new(),
                final_x,
                final_s,
                final_alphas: vec![solver.alpha],
                ledger,
            })
        }
    }
}

/// Largest absolute column sum, the membership residual of D in range(I - W).
pub fn max_abs_column_sum(d: ArrayView2<'_, f64>) -> f64 {
    d.sum_axis(Axis(0)).iter().fold(0.0f64, |a, &v| a.max(v.abs()))
}
