//! Fast self-check suite behind the `validate` subcommand: each group is a
//! cheap re-assertion of a core invariant, designed to catch build or
//! numerical-environment breakage in seconds.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::engine::{
    datos_round, lifted_round, local_datos_round, LiftedState, MessageLedger, SolverConfig,
    SolverState,
};
use crate::netgraph::{generate_erdos_renyi, GossipMatrix};
use crate::problems::{
    covariance_mle, default_gamma_schedule, elastic_net, logistic_l1, synthetic_classification,
    Smooth, TraceSign,
};
use crate::proxops::{project_spectral_box, soft_threshold, ProxSpec};
use crate::stepsize::BudgetState;

pub struct ValidationReport {
    pub groups: Vec<(String, Result<(), String>)>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.groups.iter().all(|(_, r)| r.is_ok())
    }
}

fn check(name: &str, f: impl FnOnce() -> Result<(), String>) -> (String, Result<(), String>) {
    (name.to_string(), f())
}

fn gossip_group() -> Result<(), String> {
    for seed in 0..10u64 {
        let g = generate_erdos_renyi(15, 0.4, seed).map_err(|e| e.to_string())?.graph;
        let gm = GossipMatrix::metropolis(&g, 1.0 / 3.0).map_err(|e| e.to_string())?;
        let w = gm.w();
        for i in 0..15 {
            let row: f64 = (0..15).map(|j| w[[i, j]]).sum();
            if (row - 1.0).abs() > 1e-12 {
                return Err(format!("row {i} sums to {row}"));
            }
            for j in 0..15 {
                if (w[[i, j]] - w[[j, i]]).abs() > 1e-12 {
                    return Err(format!("asymmetry at ({i},{j})"));
                }
                if i != j && (w[[i, j]] != 0.0) != g.has_edge(i, j) {
                    return Err(format!("sparsity violates the graph at ({i},{j})"));
                }
            }
        }
        let (vals, _) = crate::linalg::sym_eig(&w.to_owned());
        if vals[14] < 1.0 - 2.0 * gm.c() - 1e-12 {
            return Err(format!("smallest eigenvalue {} below 1-2c", vals[14]));
        }
    }
    Ok(())
}

fn gradient_group() -> Result<(), String> {
    let mut rng = ChaCha20Rng::seed_from_u64(77);
    let mut probe = |name: &str,
                     f: &dyn Smooth,
                     dim: usize,
                     point: Box<dyn Fn(&mut ChaCha20Rng) -> Array1<f64>>|
     -> Result<(), String> {
        for _ in 0..5 {
            let x = point(&mut rng);
            let g = f.grad(x.view());
            let h = 1e-6 * (1.0 + x.dot(&x).sqrt());
            for j in 0..dim {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (f.value(xp.view()) - f.value(xm.view())) / (2.0 * h);
                if (g[j] - fd).abs() > 1e-4 * (1.0 + g[j].abs()) {
                    return Err(format!("{name}: coordinate {j} gradient {} vs fd {fd}", g[j]));
                }
            }
        }
        Ok(())
    };

    let log = logistic_l1(synthetic_classification(1, 1, 10, 6), 1e-3).map_err(|e| e.to_string())?;
    probe("logistic", log.smooth(0), 6, Box::new(|r| Array1::from_iter((0..6).map(|_| r.gen_range(-1.0..1.0)))))?;

    let en = elastic_net(2, 1, 5, 6, 1e-3, &default_gamma_schedule(1));
    probe("elastic_net", en.smooth(0), 6, Box::new(|r| Array1::from_iter((0..6).map(|_| r.gen_range(-1.0..1.0)))))?;

    let cov = covariance_mle(3, 1, 20, 3, 0.1, 10.0, &Array2::eye(3), TraceSign::Positive)
        .map_err(|e| e.to_string())?;
    probe(
        "covariance",
        cov.smooth(0),
        6,
        Box::new(|r| {
            let diag = Array2::from_diag(&Array1::from_iter((0..3).map(|_| r.gen_range(0.5..3.0))));
            crate::problems::SymFlat::flatten(&diag).into_coords()
        }),
    )?;
    Ok(())
}

fn prox_group() -> Result<(), String> {
    let v = ndarray::array![3.0, -0.5, 0.0];
    let out = soft_threshold(v.view(), 1.0);
    if out != ndarray::array![2.0, 0.0, 0.0] {
        return Err(format!("soft threshold produced {out}"));
    }
    let spec = ProxSpec::L1 { lambda: 0.5 };
    let p = spec.prox(v.view(), 2.0).map_err(|e| e.to_string())?;
    if spec.subgradient_residual(p.view(), ((&v - &p) / 2.0).view()) > 1e-10 {
        return Err("l1 prox point fails the subgradient inclusion".into());
    }
    let x = crate::problems::SymFlat::flatten(&ndarray::array![[5.0, 0.3], [0.3, -1.0]]);
    let proj = project_spectral_box(&x, 0.5, 2.0);
    let twice = project_spectral_box(&proj, 0.5, 2.0);
    for (a, b) in proj.coords().iter().zip(twice.coords().iter()) {
        if (a - b).abs() > 1e-12 {
            return Err("spectral projection is not idempotent".into());
        }
    }
    Ok(())
}

fn lifted_group() -> Result<(), String> {
    let prob = elastic_net(5, 5, 4, 4, 1e-3, &default_gamma_schedule(5));
    let g = generate_erdos_renyi(5, 0.6, 3).map_err(|e| e.to_string())?.graph;
    let w = GossipMatrix::metropolis(&g, 1.0 / 3.0).map_err(|e| e.to_string())?;
    let cfg = SolverConfig { slack: 0.0, ..Default::default() };
    let mut state = SolverState::init(5, 4, cfg.alpha_init, 2);
    let mut lifted = LiftedState::init(&w, state.x.clone(), state.s.clone());
    let mut budget = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
    let mut ledger = MessageLedger::default();
    for k in 0..25 {
        let report = datos_round(&mut state, &prob, &w, &cfg, &mut budget, &mut ledger, None)
            .map_err(|e| e.to_string())?;
        lifted_round(&mut lifted, &prob, report.alphas[0]).map_err(|e| e.to_string())?;
        let dx = (&state.x - &lifted.x).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let ds = (&state.s - &lifted.s).iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if dx > 1e-10 || ds > 1e-10 {
            return Err(format!("round {k}: network/lifted mismatch dx={dx} ds={ds}"));
        }
    }
    Ok(())
}

fn uniform_stepsize_group() -> Result<(), String> {
    let prob = elastic_net(6, 5, 4, 4, 1e-3, &default_gamma_schedule(5));
    let g = generate_erdos_renyi(5, 0.6, 4).map_err(|e| e.to_string())?.graph;
    let w = GossipMatrix::metropolis(&g, 1.0 / 3.0).map_err(|e| e.to_string())?;
    let cfg = SolverConfig { slack: 0.0, ..Default::default() };
    let mut a = SolverState::init(5, 4, cfg.alpha_init, 8);
    let mut b = a.clone();
    let mut budget_a = BudgetState::new(cfg.budget.clone(), cfg.alpha_init);
    let mut budget_b = vec![BudgetState::new(cfg.budget.clone(), cfg.alpha_init)];
    let mut ledger = MessageLedger::default();
    for k in 0..25 {
        datos_round(&mut a, &prob, &w, &cfg, &mut budget_a, &mut ledger, None)
            .map_err(|e| e.to_string())?;
        local_datos_round(&mut b, &prob, &w, &cfg, &mut budget_b, true, &mut ledger, None)
            .map_err(|e| e.to_string())?;
        let dx = (&a.x - &b.x).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let dd = (&a.d - &b.d).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if dx > 1e-12 || dd > 1e-12 {
            return Err(format!("round {k}: uniform-stepsize mismatch dx={dx} dd={dd}"));
        }
    }
    Ok(())
}

pub fn run_all() -> ValidationReport {
    ValidationReport {
        groups: vec![
            check("gossip", gossip_group),
            check("gradients", gradient_group),
            check("prox", prox_group),
            check("lifted_equivalence", lifted_group),
            check("uniform_stepsize", uniform_stepsize_group),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes_all_groups() {
        let report = run_all();
        for (name, result) in &report.groups {
            assert!(result.is_ok(), "group {name} failed: {result:?}");
        }
        assert!(report.all_passed());
    }
}
