//! Benchmark problem families behind a uniform per-agent oracle interface.
//!
//! Every instance exposes `m` smooth local losses (value + gradient over a
//! flat coordinate space of dimension `d`) and `m` nonsmooth terms described
//! by their prox. Smooth values are `+inf` outside their open domain, which is
//! how the line-search learns it left the domain.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::{sym_eig, sym_inv_pd, sym_logdet_pd, sym_sqrt_clipped};
use crate::proxops::ProxSpec;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("label {0} is not in {{-1, +1}}")]
    BadLabel(f64),
    #[error("covariance matrix is not positive definite")]
    SigmaNotPd,
    #[error("malformed LIBSVM line {line}: {reason}")]
    MalformedLibsvm { line: usize, reason: String },
    #[error("index out of range at line {line}: feature index {index} > d={d}")]
    IndexOutOfRange { line: usize, index: usize, d: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Smooth local loss of one agent.
pub trait Smooth: Send + Sync {
    /// Function value; `+inf` outside the open domain.
    fn value(&self, x: ArrayView1<'_, f64>) -> f64;
    /// Gradient, defined wherever the value is finite.
    fn grad(&self, x: ArrayView1<'_, f64>) -> Array1<f64>;
}

/// Optional analytic metadata attached to an instance.
#[derive(Debug, Clone, Default)]
pub struct ProblemMeta {
    pub name: String,
    /// Per-agent gradient Lipschitz bounds, when computable.
    pub smoothness: Option<Vec<f64>>,
    /// Per-agent strong-convexity moduli, when computable.
    pub strong_convexity: Option<Vec<f64>>,
}

/// `m` local smooth oracles plus `m` nonsmooth prox oracles over `R^d`.
#[derive(Clone)]
pub struct ProblemInstance {
    m: usize,
    d: usize,
    smooth: Vec<Arc<dyn Smooth>>,
    nonsmooth: Vec<ProxSpec>,
    pub meta: ProblemMeta,
}

impl ProblemInstance {
    pub fn new(d: usize, smooth: Vec<Arc<dyn Smooth>>, nonsmooth: Vec<ProxSpec>, meta: ProblemMeta) -> Self {
        assert_eq!(smooth.len(), nonsmooth.len());
        assert!(!smooth.is_empty());
        Self { m: smooth.len(), d, smooth, nonsmooth, meta }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn smooth(&self, i: usize) -> &dyn Smooth {
        self.smooth[i].as_ref()
    }

    pub fn prox_specs(&self) -> &[ProxSpec] {
        &self.nonsmooth
    }

    pub fn f_value(&self, i: usize, x: ArrayView1<'_, f64>) -> f64 {
        self.smooth[i].value(x)
    }

    pub fn f_grad(&self, i: usize, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.smooth[i].grad(x)
    }

    /// Row `i` of the result is the gradient of `f_i` at row `i` of `x`.
    pub fn grad_stacked(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.m, self.d));
        for i in 0..self.m {
            out.row_mut(i).assign(&self.smooth[i].grad(x.row(i)));
        }
        out
    }

    /// Aggregate smooth value `sum_i f_i(x)` at a single point.
    pub fn total_smooth_value(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.smooth.iter().map(|f| f.value(x)).sum()
    }

    pub fn total_smooth_grad(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let mut g = Array1::zeros(self.d);
        for f in &self.smooth {
            g += &f.grad(x);
        }
        g
    }

    /// Aggregate nonsmooth value `sum_i r_i(x)`.
    pub fn total_nonsmooth_value(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.nonsmooth.iter().map(|r| r.value(x)).sum()
    }

    /// Full objective `u(x) = sum_i f_i(x) + sum_i r_i(x)`.
    pub fn objective(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.total_smooth_value(x) + self.total_nonsmooth_value(x)
    }
}

/// The centralized sum `sum_i f_i` of an instance's smooth parts, viewed as a
/// single smooth oracle.
pub struct AggregateSmooth<'a>(pub &'a ProblemInstance);

impl Smooth for AggregateSmooth<'_> {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        self.0.total_smooth_value(x)
    }
    fn grad(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        self.0.total_smooth_grad(x)
    }
}

impl std::fmt::Debug for ProblemInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemInstance")
            .field("m", &self.m)
            .field("d", &self.d)
            .field("meta", &self.meta)
            .finish()
    }
}

/// One agent's local dataset.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Array1<f64>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Array1<f64>) -> Self {
        assert_eq!(features.nrows(), labels.len());
        Self { features, labels }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

/// Upper-triangle coordinates of a symmetric matrix, with off-diagonal entries
/// scaled by sqrt(2) so that the Frobenius inner product of matrices equals
/// the Euclidean inner product of the flats.
#[derive(Debug, Clone, PartialEq)]
pub struct SymFlat {
    dim: usize,
    coords: Array1<f64>,
}

impl SymFlat {
    pub fn flat_len(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    pub fn from_coords(dim: usize, coords: Array1<f64>) -> Self {
        assert_eq!(coords.len(), Self::flat_len(dim));
        Self { dim, coords }
    }

    pub fn flatten(mat: &Array2<f64>) -> Self {
        let dim = mat.nrows();
        assert_eq!(dim, mat.ncols());
        let mut coords = Array1::zeros(Self::flat_len(dim));
        let mut k = 0;
        for i in 0..dim {
            for j in i..dim {
                let v = 0.5 * (mat[[i, j]] + mat[[j, i]]);
                coords[k] = if i == j { v } else { std::f64::consts::SQRT_2 * v };
                k += 1;
            }
        }
        Self { dim, coords }
    }

    pub fn unflatten(&self) -> Array2<f64> {
        let mut mat = Array2::zeros((self.dim, self.dim));
        let mut k = 0;
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = if i == j {
                    self.coords[k]
                } else {
                    self.coords[k] / std::f64::consts::SQRT_2
                };
                mat[[i, j]] = v;
                mat[[j, i]] = v;
                k += 1;
            }
        }
        mat
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> ArrayView1<'_, f64> {
        self.coords.view()
    }

    pub fn into_coords(self) -> Array1<f64> {
        self.coords
    }
}

// ---------------------------------------------------------------------------
// Logistic regression with l1 regularization
// ---------------------------------------------------------------------------

struct LogisticOracle {
    data: Dataset,
}

/// Numerically stable `log(1 + exp(-t))`.
fn log1p_exp_neg(t: f64) -> f64 {
    if t >= 0.0 {
        (-t).exp().ln_1p()
    } else {
        -t + t.exp().ln_1p()
    }
}

impl Smooth for LogisticOracle {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        let n = self.data.n() as f64;
        let mut acc = 0.0;
        for (row, &b) in self.data.features.rows().into_iter().zip(self.data.labels.iter()) {
            acc += log1p_exp_neg(b * row.dot(&x));
        }
        acc / n
    }

    fn grad(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.data.n() as f64;
        let mut g = Array1::zeros(x.len());
        for (row, &b) in self.data.features.rows().into_iter().zip(self.data.labels.iter()) {
            let z = b * row.dot(&x);
            // logistic(-z) = 1 / (1 + e^z), computed without overflow
            let sigma = if z >= 0.0 { (-z).exp() / (1.0 + (-z).exp()) } else { 1.0 / (1.0 + z.exp()) };
            g.scaled_add(-b * sigma / n, &row);
        }
        g
    }
}

/// Logistic loss per agent with `r_i(x) = lambda ||x||_1` (so the aggregate
/// nonsmooth term is `m * lambda * ||x||_1`).
pub fn logistic_l1(data: Vec<Dataset>, lambda: f64) -> Result<ProblemInstance, ProblemError> {
    assert!(lambda >= 0.0);
    assert!(!data.is_empty());
    let d = data[0].features.ncols();
    for ds in &data {
        for &b in ds.labels.iter() {
            if b != 1.0 && b != -1.0 {
                return Err(ProblemError::BadLabel(b));
            }
        }
    }
    let m = data.len();
    // The logistic curvature is at most 1/4, so L_i <= lambda_max(A^T A)/(4n).
    let lips: Vec<f64> = data
        .iter()
        .map(|ds| {
            let gram = ds.features.dot(&ds.features.t());
            sym_eig(&gram).0[0].max(0.0) / (4.0 * ds.n() as f64)
        })
        .collect();
    let smooth: Vec<Arc<dyn Smooth>> =
        data.into_iter().map(|ds| Arc::new(LogisticOracle { data: ds }) as Arc<dyn Smooth>).collect();
    let nonsmooth = vec![if lambda == 0.0 { ProxSpec::Zero } else { ProxSpec::L1 { lambda } }; m];
    let meta = ProblemMeta { name: "logistic_l1".into(), smoothness: Some(lips), ..Default::default() };
    Ok(ProblemInstance::new(d, smooth, nonsmooth, meta))
}

/// Synthetic binary classification data: Gaussian features, labels from the
/// sign of a random hyperplane with 10% of them flipped. The flips keep the
/// data non-separable, so the loss has a well-conditioned finite minimizer.
/// Deterministic in `seed`.
pub fn synthetic_classification(seed: u64, m: usize, n: usize, d: usize) -> Vec<Dataset> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let w: Array1<f64> = Array1::from_iter((0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
    (0..m)
        .map(|_| {
            let features = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
            let labels = Array1::from_iter(features.rows().into_iter().map(|row| {
                let clean = if row.dot(&w) >= 0.0 { 1.0 } else { -1.0 };
                if rng.gen::<f64>() < 0.1 {
                    -clean
                } else {
                    clean
                }
            }));
            Dataset::new(features, labels)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Linear regression with elastic net regularization
// ---------------------------------------------------------------------------

struct LeastSquaresOracle {
    a: Array2<f64>,
    b: Array1<f64>,
    gamma: f64,
}

impl Smooth for LeastSquaresOracle {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        let n = self.a.nrows() as f64;
        let r = &self.a.dot(&x) - &self.b;
        r.dot(&r) / n + 0.5 * self.gamma * x.dot(&x)
    }

    fn grad(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.a.nrows() as f64;
        let r = &self.a.dot(&x) - &self.b;
        let mut g = self.a.t().dot(&r) * (2.0 / n);
        g.scaled_add(self.gamma, &x);
        g
    }
}

/// Per-agent schedule `gamma_i = 0.1 + (i-1) * 0.1` (1-based agent index).
pub fn default_gamma_schedule(m: usize) -> Vec<f64> {
    (0..m).map(|i| 0.1 + i as f64 * 0.1).collect()
}

/// Least squares with ridge term `gamma_i/2 ||x||^2` per agent and
/// `r_i(x) = lambda ||x||_1`; `A_i`, `b_i` are i.i.d. standard normal.
pub fn elastic_net(
    seed: u64,
    m: usize,
    n: usize,
    d: usize,
    lambda: f64,
    gammas: &[f64],
) -> ProblemInstance {
    assert!(m >= 1 && n >= 1 && d >= 1);
    assert_eq!(gammas.len(), m);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut smooth: Vec<Arc<dyn Smooth>> = Vec::with_capacity(m);
    let mut lips = Vec::with_capacity(m);
    let mut mus = Vec::with_capacity(m);
    for &gamma in gammas {
        let a = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
        let b = Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
        // lambda_max(A^T A) = lambda_max(A A^T); the Gram side is n x n.
        let gram = a.dot(&a.t());
        let (vals, _) = sym_eig(&gram);
        lips.push(2.0 / n as f64 * vals[0].max(0.0) + gamma);
        let data_min = if n < d { 0.0 } else { vals[vals.len() - 1].max(0.0) };
        mus.push(gamma + 2.0 / n as f64 * data_min);
        smooth.push(Arc::new(LeastSquaresOracle { a, b, gamma }));
    }
    let nonsmooth = vec![if lambda == 0.0 { ProxSpec::Zero } else { ProxSpec::L1 { lambda } }; m];
    let meta = ProblemMeta {
        name: "elastic_net".into(),
        smoothness: Some(lips),
        strong_convexity: Some(mus),
    };
    ProblemInstance::new(d, smooth, nonsmooth, meta)
}

// ---------------------------------------------------------------------------
// Covariance maximum likelihood over the symmetric-flat carrier
// ---------------------------------------------------------------------------

struct CovarianceOracle {
    y: Array2<f64>,
    dim: usize,
    trace_sign: f64,
}

impl Smooth for CovarianceOracle {
    fn value(&self, x: ArrayView1<'_, f64>) -> f64 {
        let mat = SymFlat::from_coords(self.dim, x.to_owned()).unflatten();
        match sym_logdet_pd(&mat) {
            Some(logdet) => {
                let tr = (&mat * &self.y).sum();
                -logdet + self.trace_sign * tr
            }
            None => f64::INFINITY,
        }
    }

    fn grad(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        let mat = SymFlat::from_coords(self.dim, x.to_owned()).unflatten();
        let inv = sym_inv_pd(&mat);
        let g = -&inv + self.trace_sign * &self.y;
        SymFlat::flatten(&g).into_coords()
    }
}

/// Which sign the trace term carries in the covariance likelihood; the
/// positive sign is the convex Gaussian negative log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceSign {
    #[default]
    Positive,
    Negative,
}

/// Per-agent loss `-log det X + s * trace(X Y_i)` over the symmetric-flat
/// carrier, with `r_i` the indicator of the spectral box `a I <= X <= b I`.
/// Each `Y_i` is the empirical second moment of `n` Gaussian samples with
/// covariance `sigma`; the likelihood is normalized per sample so gradient
/// magnitudes stay O(1) regardless of `n`.
#[allow(clippy::too_many_arguments)]
pub fn covariance_mle(
    seed: u64,
    m: usize,
    n: usize,
    d_mat: usize,
    a: f64,
    b: f64,
    sigma: &Array2<f64>,
    trace_sign: TraceSign,
) -> Result<ProblemInstance, ProblemError> {
    assert!(0.0 < a && a <= b);
    let (vals, _) = sym_eig(sigma);
    if vals.iter().any(|&v| v <= 0.0) {
        return Err(ProblemError::SigmaNotPd);
    }
    let root = sym_sqrt_clipped(sigma);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let sign = match trace_sign {
        TraceSign::Positive => 1.0,
        TraceSign::Negative => -1.0,
    };
    let mut smooth: Vec<Arc<dyn Smooth>> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut y = Array2::zeros((d_mat, d_mat));
        for _ in 0..n {
            let z = Array1::from_iter((0..d_mat).map(|_| rng.sample::<f64, _>(StandardNormal)));
            let s = root.dot(&z);
            for i in 0..d_mat {
                for j in 0..d_mat {
                    y[[i, j]] += s[i] * s[j] / n as f64;
                }
            }
        }
        smooth.push(Arc::new(CovarianceOracle { y, dim: d_mat, trace_sign: sign }));
    }
    let nonsmooth = vec![ProxSpec::SpectralBox { a, b, dim: d_mat }; m];
    // On the spectral box the log-det Hessian X^{-1} (x) X^{-1} is pinched
    // between 1/b^2 and 1/a^2.
    let meta = ProblemMeta {
        name: "covariance_mle".into(),
        smoothness: Some(vec![1.0 / (a * a); m]),
        strong_convexity: Some(vec![1.0 / (b * b); m]),
    };
    Ok(ProblemInstance::new(SymFlat::flat_len(d_mat), smooth, nonsmooth, meta))
}

// ---------------------------------------------------------------------------
// Dataset ingestion
// ---------------------------------------------------------------------------

/// How raw LIBSVM labels are mapped into {-1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelRule {
    /// Even digits map to +1, odd digits to -1.
    #[default]
    DigitParity,
    /// Positive labels map to +1, the rest to -1.
    Sign,
}

impl LabelRule {
    fn apply(self, raw: f64) -> f64 {
        match self {
            LabelRule::DigitParity => {
                if (raw.round() as i64).rem_euclid(2) == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            LabelRule::Sign => {
                if raw > 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
        }
    }
}

/// Reads a sparse LIBSVM file (`label idx:val ...`, 1-based indices) into
/// dense rows of length `d`, keeping at most `limit` rows.
pub fn read_libsvm(
    path: impl AsRef<Path>,
    d: usize,
    limit: usize,
    rule: LabelRule,
) -> Result<Dataset, ProblemError> {
    let text = fs::read_to_string(path)?;
    parse_libsvm(&text, d, limit, rule)
}

pub fn parse_libsvm(text: &str, d: usize, limit: usize, rule: LabelRule) -> Result<Dataset, ProblemError> {
    let mut rows: Vec<Array1<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if rows.len() >= limit {
            break;
        }
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let raw_label: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ProblemError::MalformedLibsvm { line: line_no, reason: "missing label".into() })?;
        let mut row = Array1::zeros(d);
        for tok in parts {
            let (i, v) = tok.split_once(':').ok_or_else(|| ProblemError::MalformedLibsvm {
                line: line_no,
                reason: format!("expected idx:val, got `{tok}`"),
            })?;
            let index: usize = i.parse().map_err(|_| ProblemError::MalformedLibsvm {
                line: line_no,
                reason: format!("bad index `{i}`"),
            })?;
            let value: f64 = v.parse().map_err(|_| ProblemError::MalformedLibsvm {
                line: line_no,
                reason: format!("bad value `{v}`"),
            })?;
            if index == 0 || index > d {
                return Err(ProblemError::IndexOutOfRange { line: line_no, index, d });
            }
            row[index - 1] = value;
        }
        rows.push(row);
        labels.push(rule.apply(raw_label));
    }
    let n = rows.len();
    let mut features = Array2::zeros((n, d));
    for (i, row) in rows.into_iter().enumerate() {
        features.row_mut(i).assign(&row);
    }
    Ok(Dataset::new(features, Array1::from_vec(labels)))
}

/// Contiguous equal shards in row order; trailing rows that do not fill a
/// shard are dropped and the count reported.
pub fn split_dataset(data: &Dataset, m: usize) -> (Vec<Dataset>, usize) {
    assert!(m >= 1);
    let per = data.n() / m;
    let dropped = data.n() - per * m;
    let shards = (0..m)
        .map(|i| {
            let lo = i * per;
            let hi = lo + per;
            Dataset::new(
                data.features.slice(ndarray::s![lo..hi, ..]).to_owned(),
                data.labels.slice(ndarray::s![lo..hi]).to_owned(),
            )
        })
        .collect();
    (shards, dropped)
}
