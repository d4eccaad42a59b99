//! Convergence diagnostics measured against a high-accuracy reference point.

use std::io;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use thiserror::Error;

use crate::problems::ProblemInstance;

/// Centralized optimum used to measure gaps, with an optional per-agent dual
/// certificate.
#[derive(Debug, Clone)]
pub struct ReferencePoint {
    pub x_star: Array1<f64>,
    pub u_star: f64,
    pub s_star_rows: Option<Array2<f64>>,
}

/// `(1/m) sum_i u(x_i) - u*` where `u` is the full objective evaluated at
/// each agent's local row; infinite rows propagate.
pub fn optimality_gap(x: ArrayView2<'_, f64>, prob: &ProblemInstance, r: &ReferencePoint) -> f64 {
    let m = x.nrows() as f64;
    let total: f64 = x.rows().into_iter().map(|row| prob.objective(row)).sum();
    total / m - r.u_star
}

/// Frobenius distance of the stack to its consensual projection
/// `||X - 1 xbar^T||_F`.
pub fn consensus_error(x: ArrayView2<'_, f64>) -> f64 {
    let mean = x.mean_axis(Axis(0)).unwrap();
    let mut acc = 0.0;
    for row in x.rows() {
        let diff = &row - &mean;
        acc += diff.dot(&diff);
    }
    acc.sqrt()
}

/// Computable merit-function blocks `||X - X*||^2 + alpha_prev^2 ||S - S*||^2`
/// with `X* = 1 (x*)^T`; requires the dual certificate rows.
pub fn lyapunov_value(
    x: ArrayView2<'_, f64>,
    s: ArrayView2<'_, f64>,
    alpha_prev: f64,
    r: &ReferencePoint,
) -> f64 {
    let s_star = r.s_star_rows.as_ref().expect("lyapunov_value needs the dual certificate rows");
    let mut primal = 0.0;
    for row in x.rows() {
        let diff = &row - &r.x_star;
        primal += diff.dot(&diff);
    }
    let dual = (&s.to_owned() - s_star).iter().map(|v| v * v).sum::<f64>();
    primal + alpha_prev * alpha_prev * dual
}

/// Streaming stepsize-weighted averages `(sum alpha^{t-1} A^t) / (sum alpha^{t-1})`.
#[derive(Debug, Clone)]
pub struct ErgodicAverage {
    sum_a: Array2<f64>,
    sum_s: Array2<f64>,
    theta: f64,
}

impl ErgodicAverage {
    pub fn new(m: usize, d: usize) -> Self {
        Self { sum_a: Array2::zeros((m, d)), sum_s: Array2::zeros((m, d)), theta: 0.0 }
    }

    pub fn push(&mut self, a: ArrayView2<'_, f64>, s: ArrayView2<'_, f64>, alpha_prev: f64) {
        assert!(alpha_prev > 0.0);
        self.sum_a.scaled_add(alpha_prev, &a);
        self.sum_s.scaled_add(alpha_prev, &s);
        self.theta += alpha_prev;
    }

    /// `None` before the first push.
    pub fn averages(&self) -> Option<(Array2<f64>, Array2<f64>)> {
        if self.theta == 0.0 {
            return None;
        }
        Some((&self.sum_a / self.theta, &self.sum_s / self.theta))
    }
}

/// Per-agent sign supports `{j : |x_ij| > tol}` and whether every agent's
/// support equals the reference support.
pub fn support_tracker(
    x: ArrayView2<'_, f64>,
    r: &ReferencePoint,
    tol: f64,
) -> (Vec<Vec<usize>>, bool) {
    let ref_support: Vec<usize> =
        (0..r.x_star.len()).filter(|&j| r.x_star[j].abs() > tol).collect();
    let supports: Vec<Vec<usize>> = x
        .rows()
        .into_iter()
        .map(|row| (0..row.len()).filter(|&j| row[j].abs() > tol).collect())
        .collect();
    let identified = supports.iter().all(|s| *s == ref_support);
    (supports, identified)
}

/// Default support tolerance, scaled by the reference magnitude.
pub fn default_support_tol(x_star: ArrayView1<'_, f64>) -> f64 {
    1e-9 * (1.0 + x_star.iter().fold(0.0f64, |a, &v| a.max(v.abs())))
}

#[derive(Debug, Error)]
pub enum FitError {
    #[error("linear rate fit needs a window of >= 10 positive entries, got {0}")]
    WindowTooSmall(usize),
    #[error("nonpositive entry {value} at offset {index} in the fit window")]
    NonpositiveEntry { index: usize, value: f64 },
}

/// Least-squares slope of `log e_k` over the trailing `window` entries;
/// returns the per-round contraction factor `rho = exp(slope)` and the `r^2`
/// of the fit (1 for a constant series).
pub fn linear_rate_fit(series: &[f64], window: usize) -> Result<(f64, f64), FitError> {
    if window < 10 || series.len() < window {
        return Err(FitError::WindowTooSmall(window.min(series.len())));
    }
    let tail = &series[series.len() - window..];
    let mut logs = Vec::with_capacity(window);
    for (i, &v) in tail.iter().enumerate() {
        if v <= 0.0 {
            return Err(FitError::NonpositiveEntry { index: i, value: v });
        }
        logs.push(v.ln());
    }
    let n = window as f64;
    let mean_k = (window as f64 - 1.0) / 2.0;
    let mean_y = logs.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (i, &y) in logs.iter().enumerate() {
        let dk = i as f64 - mean_k;
        let dy = y - mean_y;
        sxx += dk * dk;
        sxy += dk * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok((slope.exp(), r2))
}

/// Empirical O(1/k) certificate on a gap series (index 0 is round 1):
/// `C_hat = max_k k * gap_k`, with `ok` when the maximizer sits in the first
/// half and the products are non-increasing (up to relative noise) over the
/// trailing half.
pub fn sublinear_bound_check(gaps: &[f64]) -> (f64, bool) {
    if gaps.is_empty() {
        return (0.0, false);
    }
    let products: Vec<f64> = gaps.iter().enumerate().map(|(i, &g)| (i + 1) as f64 * g).collect();
    let c_hat = products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = products.len().div_ceil(2);
    let head_max = products[..half].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tail_monotone = products[products.len() / 2..]
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-6) + 1e-12);
    (c_hat, head_max >= c_hat * (1.0 - 1e-6) - 1e-12 && tail_monotone)
}

/// Two-column `k,value` plot data.
pub fn write_series_csv(out: &mut dyn io::Write, series: &[(usize, f64)]) -> io::Result<()> {
    writeln!(out, "k,value")?;
    for &(k, v) in series {
        writeln!(out, "{k},{v:.17e}")?;
    }
    Ok(())
}

pub fn series_to_csv_string(series: &[(usize, f64)]) -> String {
    let mut buf = Vec::new();
    write_series_csv(&mut buf, series).unwrap();
    String::from_utf8(buf).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{default_gamma_schedule, elastic_net};
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn stacked(x: &Array1<f64>, m: usize) -> Array2<f64> {
        Array2::from_shape_fn((m, x.len()), |(_, j)| x[j])
    }

    #[test]
    fn gap_zero_at_reference_and_matches_direct_sum() {
        let prob = elastic_net(4, 3, 4, 5, 1e-3, &default_gamma_schedule(3));
        let x0 = array![0.3, -0.2, 0.0, 1.0, -0.5];
        let r = ReferencePoint { x_star: x0.clone(), u_star: prob.objective(x0.view()), s_star_rows: None };
        assert!(optimality_gap(stacked(&x0, 3).view(), &prob, &r).abs() < 1e-12);

        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x = Array2::from_shape_fn((3, 5), |_| rng.gen_range(-1.0..1.0));
        let gap = optimality_gap(x.view(), &prob, &r);
        let mut direct = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                direct += prob.f_value(j, x.row(i));
            }
            direct += 3.0 * 1e-3 * x.row(i).iter().map(|v| v.abs()).sum::<f64>();
        }
        direct = direct / 3.0 - r.u_star;
        assert!((gap - direct).abs() < 1e-12);
    }

    #[test]
    fn consensus_error_hand_values() {
        let consensual = stacked(&array![1.0, 2.0], 4);
        assert!(consensus_error(consensual.view()) < 1e-15);

        let x = array![[1.0, 0.0], [-1.0, 0.0]];
        assert!((consensus_error(x.view()) - std::f64::consts::SQRT_2).abs() < 1e-12);

        // Invariant under adding a constant row vector.
        let shift = array![3.0, -2.0];
        let shifted = &x + &stacked(&shift, 2);
        assert!((consensus_error(shifted.view()) - consensus_error(x.view())).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_scaling() {
        let r = ReferencePoint {
            x_star: array![1.0, 0.0],
            u_star: 0.0,
            s_star_rows: Some(array![[0.5, 0.0], [0.0, 0.5]]),
        };
        let x = array![[1.0, 0.0], [1.0, 0.0]];
        let s = array![[0.5, 0.0], [0.0, 0.5]];
        assert_eq!(lyapunov_value(x.view(), s.view(), 3.0, &r), 0.0);

        let s2 = array![[1.5, 0.0], [0.0, 0.5]];
        let v1 = lyapunov_value(x.view(), s2.view(), 1.0, &r);
        let v2 = lyapunov_value(x.view(), s2.view(), 2.0, &r);
        assert!((v2 - 4.0 * v1).abs() < 1e-12);
    }

    #[test]
    fn ergodic_average_weighted_and_streaming() {
        let a1 = array![[1.0, 2.0]];
        let a2 = array![[5.0, 6.0]];
        let mut e = ErgodicAverage::new(1, 2);
        assert!(e.averages().is_none());
        e.push(a1.view(), a1.view(), 1.0);
        e.push(a2.view(), a2.view(), 3.0);
        let (abar, _) = e.averages().unwrap();
        assert!((abar[[0, 0]] - 4.0).abs() < 1e-14);
        assert!((abar[[0, 1]] - 5.0).abs() < 1e-14);

        // Streaming equals batch recomputation on a random history.
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut e = ErgodicAverage::new(2, 3);
        let mut num = Array2::<f64>::zeros((2, 3));
        let mut theta = 0.0;
        for _ in 0..40 {
            let a = Array2::from_shape_fn((2, 3), |_| rng.gen_range(-1.0..1.0));
            let alpha = rng.gen_range(0.1..5.0);
            e.push(a.view(), a.view(), alpha);
            num.scaled_add(alpha, &a);
            theta += alpha;
        }
        let (abar, _) = e.averages().unwrap();
        let batch = num / theta;
        for (u, v) in abar.iter().zip(batch.iter()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn support_tracking() {
        let r = ReferencePoint { x_star: array![0.5, 0.0, -0.2], u_star: 0.0, s_star_rows: None };
        let tol = default_support_tol(r.x_star.view());
        let x = array![[0.5, 0.0, -0.2], [0.4, 0.0, -0.1]];
        let (supports, identified) = support_tracker(x.view(), &r, tol);
        assert_eq!(supports[0], vec![0, 2]);
        assert!(identified);

        let x = array![[0.5, 1e-12, -0.2], [0.4, 0.3, -0.1]];
        let (_, identified) = support_tracker(x.view(), &r, tol);
        assert!(!identified);

        // Tolerance above max|x*|: reference support empty.
        let (supports, identified) = support_tracker(x.view(), &r, 10.0);
        assert!(supports.iter().all(|s| s.is_empty()));
        assert!(identified);
    }

    #[test]
    fn rate_fit_geometric_harmonic_constant() {
        let geo: Vec<f64> = (0..100).map(|k| 0.5f64.powi(k)).collect();
        let (rho, r2) = linear_rate_fit(&geo, 50).unwrap();
        assert!((rho - 0.5).abs() < 1e-10);
        assert!((r2 - 1.0).abs() < 1e-10);

        let harmonic: Vec<f64> = (1..=5000).map(|k| 1.0 / k as f64).collect();
        let (rho, _) = linear_rate_fit(&harmonic, 2000).unwrap();
        assert!(rho > 0.999 && rho < 1.0);

        let constant = vec![2.0; 40];
        let (rho, r2) = linear_rate_fit(&constant, 20).unwrap();
        assert!((rho - 1.0).abs() < 1e-12);
        assert_eq!(r2, 1.0);

        assert!(linear_rate_fit(&constant, 5).is_err());
        let bad = vec![1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        assert!(linear_rate_fit(&bad, 10).is_err());
    }

    #[test]
    fn sublinear_certificates() {
        let exact: Vec<f64> = (1..=200).map(|k| 3.0 / k as f64).collect();
        let (c, ok) = sublinear_bound_check(&exact);
        assert!((c - 3.0).abs() < 1e-12);
        assert!(ok);

        let slow: Vec<f64> = (1..=200).map(|k| 1.0 / (k as f64).sqrt()).collect();
        let (_, ok) = sublinear_bound_check(&slow);
        assert!(!ok);
    }

    #[test]
    fn series_csv_format() {
        let s = series_to_csv_string(&[(0, 1.0), (1, 0.5)]);
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("k,value"));
        assert!(lines.next().unwrap().starts_with("0,1"));
    }
}
