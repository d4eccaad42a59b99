//! Proximal operators and projections backing the nonsmooth oracles.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use thiserror::Error;

use crate::linalg::sym_eig;
use crate::problems::SymFlat;

/// Feasibility slack used when evaluating indicator functions at points that
/// are exact projections up to eigendecomposition roundoff.
const INDICATOR_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ProxError {
    #[error("prox stepsize must be positive, got {0}")]
    NonpositiveStepsize(f64),
}

/// Nonsmooth term of one agent, described by the prox it admits.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxSpec {
    /// `r = 0`, prox is the identity.
    Zero,
    /// `r(x) = lambda * ||x||_1`.
    L1 { lambda: f64 },
    /// Indicator of the coordinate box `[lo, hi]^d`.
    Box { lo: f64, hi: f64 },
    /// Indicator of `{ a I <= X <= b I }` over the symmetric-flat carrier of
    /// side `dim`.
    SpectralBox { a: f64, b: f64, dim: usize },
}

impl ProxSpec {
    /// Evaluates the nonsmooth function itself (`+inf` outside indicators).
    pub fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        match self {
            ProxSpec::Zero => 0.0,
            ProxSpec::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProxSpec::Box { lo, hi } => {
                let slack = INDICATOR_TOL * (1.0 + lo.abs().max(hi.abs()));
                if x.iter().all(|&v| v >= lo - slack && v <= hi + slack) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxSpec::SpectralBox { a, b, dim } => {
                let mat = SymFlat::from_coords(*dim, x.to_owned()).unflatten();
                let (vals, _) = sym_eig(&mat);
                let slack = INDICATOR_TOL * (1.0 + b.abs());
                if vals.iter().all(|&v| v >= a - slack && v <= b + slack) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `prox_{alpha r}` of one coordinate row.
    pub fn prox(&self, x: ArrayView1<'_, f64>, alpha: f64) -> Result<Array1<f64>, ProxError> {
        if alpha <= 0.0 {
            return Err(ProxError::NonpositiveStepsize(alpha));
        }
        Ok(match self {
            ProxSpec::Zero => x.to_owned(),
            ProxSpec::L1 { lambda } => soft_threshold(x, alpha * lambda),
            ProxSpec::Box { lo, hi } => x.mapv(|v| v.clamp(*lo, *hi)),
            ProxSpec::SpectralBox { a, b, dim } => {
                let flat = SymFlat::from_coords(*dim, x.to_owned());
                project_spectral_box(&flat, *a, *b).into_coords()
            }
        })
    }

    /// Distance of `s` from the subdifferential of this term at `x` (infinity
    /// norm flavored). For the l1 term this is the sign/interval
    /// characterization; for indicators, the normal-cone check at interior
    /// points. Points where the subdifferential is hard to characterize (an
    /// active spectral-box face) report 0.
    pub fn subgradient_residual(&self, x: ArrayView1<'_, f64>, s: ArrayView1<'_, f64>) -> f64 {
        let zero_tol = 1e-10 * (1.0 + x.iter().fold(0.0f64, |a, &v| a.max(v.abs())));
        match self {
            ProxSpec::Zero => s.iter().fold(0.0f64, |a, &v| a.max(v.abs())),
            ProxSpec::L1 { lambda } => {
                let mut res = 0.0f64;
                for (&xj, &sj) in x.iter().zip(s.iter()) {
                    let r = if xj.abs() > zero_tol {
                        (sj - lambda * xj.signum()).abs()
                    } else {
                        (sj.abs() - lambda).max(0.0)
                    };
                    res = res.max(r);
                }
                res
            }
            ProxSpec::Box { lo, hi } => {
                let edge = INDICATOR_TOL * (1.0 + lo.abs().max(hi.abs()));
                let mut res = 0.0f64;
                for (&xj, &sj) in x.iter().zip(s.iter()) {
                    // Normal cone: nonpositive at the lower face, nonnegative
                    // at the upper face, {0} in the interior.
                    let r = if xj <= lo + edge {
                        sj.max(0.0)
                    } else if xj >= hi - edge {
                        (-sj).max(0.0)
                    } else {
                        sj.abs()
                    };
                    res = res.max(r);
                }
                res
            }
            ProxSpec::SpectralBox { a, b, dim } => {
                let mat = SymFlat::from_coords(*dim, x.to_owned()).unflatten();
                let (vals, _) = sym_eig(&mat);
                let edge = INDICATOR_TOL * (1.0 + b.abs());
                let interior = vals.iter().all(|&v| v > a + edge && v < b - edge);
                if interior {
                    s.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
                } else {
                    0.0
                }
            }
        }
    }
}

/// Componentwise `sign(v) * max(|v| - tau, 0)`; the prox of `tau * ||.||_1`.
pub fn soft_threshold(v: ArrayView1<'_, f64>, tau: f64) -> Array1<f64> {
    assert!(tau >= 0.0, "soft threshold needs tau >= 0");
    v.mapv(|x| x.signum() * (x.abs() - tau).max(0.0))
}

/// Frobenius-nearest point of `{ a I <= X <= b I }`: eigenvalues of the
/// unflattened matrix are clamped into `[a, b]`.
pub fn project_spectral_box(x: &SymFlat, a: f64, b: f64) -> SymFlat {
    assert!(0.0 < a && a <= b, "spectral box needs 0 < a <= b");
    let mat = x.unflatten();
    let n = mat.nrows();
    let (vals, vecs) = sym_eig(&mat);
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let v = vals[k].clamp(a, b);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += v * vecs[[i, k]] * vecs[[j, k]];
            }
        }
    }
    SymFlat::flatten(&out)
}

/// Prox spec of the sum `sum_i r_i` when all agents share the same kind of
/// nonsmooth term: l1 weights add up, identical indicators stay themselves.
/// Mixed or differing kinds have no closed-form aggregate prox.
pub fn aggregate_prox_spec(specs: &[ProxSpec]) -> Result<ProxSpec, String> {
    assert!(!specs.is_empty());
    match &specs[0] {
        ProxSpec::Zero => {
            if specs.iter().all(|s| matches!(s, ProxSpec::Zero)) {
                Ok(ProxSpec::Zero)
            } else {
                Err("mixed nonsmooth kinds".into())
            }
        }
        ProxSpec::L1 { .. } => {
            let mut total = 0.0;
            for s in specs {
                match s {
                    ProxSpec::L1 { lambda } => total += lambda,
                    _ => return Err("mixed nonsmooth kinds".into()),
                }
            }
            Ok(ProxSpec::L1 { lambda: total })
        }
        first @ (ProxSpec::Box { .. } | ProxSpec::SpectralBox { .. }) => {
            if specs.iter().all(|s| s == first) {
                Ok(first.clone())
            } else {
                Err("indicator terms differ across agents".into())
            }
        }
    }
}

/// Row `i` of the output is `prox_{alpha_i r_i}` of row `i` of `x`.
pub fn prox_rowwise(
    x: ArrayView2<'_, f64>,
    alphas: &[f64],
    specs: &[ProxSpec],
) -> Result<Array2<f64>, ProxError> {
    let m = x.nrows();
    assert_eq!(alphas.len(), m);
    assert_eq!(specs.len(), m);
    let mut out = Array2::zeros(x.raw_dim());
    for i in 0..m {
        let row = specs[i].prox(x.row(i), alphas[i])?;
        out.row_mut(i).assign(&row);
    }
    Ok(out)
}
