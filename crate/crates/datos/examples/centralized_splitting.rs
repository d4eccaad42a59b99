//! The centralized adaptive three-operator splitting loop on a 1-D problem
//! with a known closed form: minimizing `0.5 (x - 2)^2 + 0.5 |x|` gives the
//! soft threshold `x* = 1.5`. The decentralized solvers are instantiations of
//! this same loop over a lifted network variable.
//!
//! Run with: cargo run --example centralized_splitting

use datos::engine::AdaptiveDys;
use datos::problems::Smooth;
use datos::proxops::ProxSpec;
use datos::stepsize::{BudgetRule, LineSearchParams};
use ndarray::{array, Array1, ArrayView1};

struct Quadratic {
    b: f64,
}

impl Smooth for Quadratic {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        0.5 * (x[0] - self.b).powi(2)
    }
    fn grad(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        array![x[0] - self.b]
    }
}

fn main() {
    let f = Quadratic { b: 2.0 };
    let lambda = 0.5;
    let r1 = ProxSpec::L1 { lambda };
    let r2 = ProxSpec::Zero;
    let expected = 1.5;

    let mut solver = AdaptiveDys::new(
        array![-3.0],
        array![0.0],
        &f,
        &r1,
        &r2,
        LineSearchParams::default(),
        BudgetRule::Fixed { beta: 1.0, p: 2.0 },
        10.0,
    );

    println!("iter      x          |x - x*|      alpha     trials");
    for k in 1..=1000 {
        solver.step().unwrap();
        let err = (solver.x[0] - expected).abs();
        if k <= 5 || k % 25 == 0 || err <= 1e-10 {
            println!(
                "{k:>4}  {:>9.6}  {:>11.3e}  {:>9.4}  {:>6}",
                solver.x[0], err, solver.alpha, solver.last_trials
            );
        }
        if err <= 1e-10 {
            println!("\nconverged to the soft-threshold solution x* = {expected}");
            return;
        }
    }
    println!("\ndid not reach 1e-10 in 1000 iterations");
}
