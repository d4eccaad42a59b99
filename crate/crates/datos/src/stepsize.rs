//! Backtracking line search, candidate stepsize rules, and the summable
//! growth budgets that cap how fast a stepsize may recover after shrinking.

use ndarray::ArrayView1;
use thiserror::Error;

use crate::problems::Smooth;

#[derive(Debug, Clone)]
pub struct LineSearchParams {
    /// Multiplicative shrink factor per failed trial, in (0, 1).
    pub eta: f64,
    /// Curvature fraction in the sufficient-decrease test, in (0, 1).
    pub delta: f64,
    /// Hard cap on trials before giving up.
    pub max_trials: usize,
    /// Relative slack added to the test's right-hand side; set to zero for
    /// theory-exact behavior, keep small positive in floating point.
    pub slack: f64,
}

impl Default for LineSearchParams {
    fn default() -> Self {
        Self { eta: 0.5, delta: 0.9, max_trials: 60, slack: 1e-12 }
    }
}

#[derive(Debug, Error)]
pub enum LineSearchError {
    #[error("line search exhausted {trials} trials, last stepsize {alpha}")]
    TrialsExhausted { alpha: f64, trials: usize },
}

/// Backtracks `alpha` from `alpha0` until the point `x2 + alpha * dir`
/// satisfies
///
/// ```text
/// f(x+) <= f(x1) + <grad f(x1), x+ - x1> + delta/(2 alpha) ||x+ - x1||^2
///          + slack * (1 + |f(x1)|)
/// ```
///
/// shrinking `alpha <- eta * alpha` on each failure. An infinite `f(x+)`
/// always fails the test, which is how domain exits are detected. Uses one
/// gradient evaluation total and one function evaluation per trial. Returns
/// the accepted stepsize and the number of trials.
pub fn linesearch(
    alpha0: f64,
    x1: ArrayView1<'_, f64>,
    x2: ArrayView1<'_, f64>,
    dir: ArrayView1<'_, f64>,
    f: &dyn Smooth,
    params: &LineSearchParams,
) -> Result<(f64, usize), LineSearchError> {
    assert!(alpha0 > 0.0);
    assert!(0.0 < params.eta && params.eta < 1.0);
    assert!(0.0 < params.delta && params.delta < 1.0);
    let f1 = f.value(x1);
    let g1 = f.grad(x1);
    let slack = params.slack * (1.0 + f1.abs());
    let mut alpha = alpha0;
    for trial in 1..=params.max_trials {
        let xp = &x2 + &(alpha * &dir);
        let step = &xp - &x1;
        let fp = f.value(xp.view());
        let bound = f1 + g1.dot(&step) + params.delta / (2.0 * alpha) * step.dot(&step) + slack;
        if fp <= bound {
            return Ok((alpha, trial));
        }
        alpha *= params.eta;
    }
    Err(LineSearchError::TrialsExhausted { alpha, trials: params.max_trials })
}

fn sq_norm(v: ArrayView1<'_, f64>) -> f64 {
    v.dot(&v)
}

/// Candidate stepsize for the globally coordinated variant:
///
/// ```text
/// sqrt(alpha_prev^2 + min((1-delta)/4 * ||a - x_prev||^2
///                           / (||s - s0||^2 + 2c ||t||^2), budget))
/// ```
///
/// with the convention that a zero denominator makes the ratio `+inf`, so the
/// budget alone caps the growth.
pub fn candidate_alpha_global(
    alpha_prev: f64,
    a_i: ArrayView1<'_, f64>,
    x_prev_i: ArrayView1<'_, f64>,
    s_i: ArrayView1<'_, f64>,
    s0_i: ArrayView1<'_, f64>,
    t_i: ArrayView1<'_, f64>,
    c: f64,
    delta: f64,
    budget: f64,
) -> f64 {
    let num = (1.0 - delta) / 4.0 * sq_norm((&a_i - &x_prev_i).view());
    let den = sq_norm((&s_i - &s0_i).view()) + 2.0 * c * sq_norm(t_i);
    let ratio = if den == 0.0 { f64::INFINITY } else { num / den };
    (alpha_prev * alpha_prev + ratio.min(budget)).sqrt()
}

/// Candidate stepsize for the neighbor-only variant: the agent grows its own
/// stepsize by the shared budget, `sqrt(alpha_i^2 + budget)`.
pub fn candidate_alpha_local(alpha_i: f64, budget: f64) -> f64 {
    (alpha_i * alpha_i + budget).sqrt()
}

/// Growth-budget schedules. Both have a finite total mass, which is what
/// keeps the stepsize sequence bounded.
#[derive(Debug, Clone, PartialEq)]
pub enum BudgetRule {
    /// `n^k = beta / (k+1)^p`.
    Fixed { beta: f64, p: f64 },
    /// `n^k = beta / ((r+1)^q (tau+1)^p)` where `r` counts drops so far and
    /// `tau` is the number of rounds since the most recent drop. A drop is a
    /// round whose incoming stepsize is at most `eta_prime` times the running
    /// minimum of all previously seen stepsizes.
    DropReset { beta: f64, p: f64, q: f64, eta_prime: f64 },
}

/// Stateful budget generator. Call [`BudgetState::next`] once at the start of
/// each round, passing the most recent post-consensus stepsize (on the first
/// call, the initial stepsize the state was constructed with).
#[derive(Debug, Clone)]
pub struct BudgetState {
    rule: BudgetRule,
    k: usize,
    /// Most recent drop round; -1 before any drop occurs.
    last_drop: i64,
    drops: usize,
    running_min: f64,
}

impl BudgetState {
    pub fn new(rule: BudgetRule, alpha_init: f64) -> Self {
        let (BudgetRule::Fixed { beta, p } | BudgetRule::DropReset { beta, p, .. }) = rule;
        assert!(beta > 0.0 && p > 1.0);
        if let BudgetRule::DropReset { q, eta_prime, .. } = rule {
            assert!(q > 1.0);
            assert!(0.0 < eta_prime && eta_prime < 1.0);
        }
        assert!(alpha_init > 0.0);
        Self { rule, k: 0, last_drop: -1, drops: 0, running_min: alpha_init }
    }

    /// Budget for the round about to run.
    pub fn next(&mut self, alpha: f64) -> f64 {
        let n = match self.rule {
            BudgetRule::Fixed { beta, p } => beta / ((self.k + 1) as f64).powf(p),
            BudgetRule::DropReset { beta, p, q, eta_prime } => {
                if alpha <= eta_prime * self.running_min {
                    self.last_drop = self.k as i64;
                    self.drops += 1;
                }
                self.running_min = self.running_min.min(alpha);
                let tau = (self.k as i64 - self.last_drop) as f64;
                let r = self.drops as f64;
                beta / ((r + 1.0).powf(q) * (tau + 1.0).powf(p))
            }
        };
        self.k += 1;
        n
    }

    pub fn drops(&self) -> usize {
        self.drops
    }
}

/// Upper bound on the total budget mass of either schedule: `beta * S_p * S_q`
/// where `S_p >= sum_{j>=1} j^{-p}` (for the fixed schedule `S_q = 1`).
pub fn budget_mass_bound(rule: &BudgetRule) -> f64 {
    match *rule {
        BudgetRule::Fixed { beta, p } => beta * zeta_upper(p),
        BudgetRule::DropReset { beta, p, q, .. } => beta * zeta_upper(p) * zeta_upper(q),
    }
}

/// Partial sum plus integral tail bound, so this is always >= zeta(p).
fn zeta_upper(p: f64) -> f64 {
    let n = 100_000usize;
    let partial: f64 = (1..=n).map(|j| (j as f64).powf(-p)).sum();
    partial + (n as f64).powf(1.0 - p) / (p - 1.0)
}
