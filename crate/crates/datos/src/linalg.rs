//! Small dense linear-algebra helpers shared by the graph and problem modules.
//!
//! All matrices here are tiny (agent counts or matrix-variable sides of a few
//! dozen at most), so everything goes through a dense symmetric
//! eigendecomposition.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

/// Eigendecomposition of a symmetric matrix: pairs `(eigenvalues, eigenvectors)`
/// with eigenvectors stored as columns. Eigenvalues are sorted descending.
pub fn sym_eig(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "sym_eig needs a square matrix");
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (a[[i, j]] + a[[j, i]]));
    let eig = m.symmetric_eigen();
    // nalgebra returns eigenvalues unsorted; sort descending for a stable API.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let vals = Array1::from_iter(idx.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = Array2::zeros((n, n));
    for (col, &i) in idx.iter().enumerate() {
        for row in 0..n {
            vecs[[row, col]] = eig.eigenvectors[(row, i)];
        }
    }
    (vals, vecs)
}

/// Applies `f` to the eigenvalues of a symmetric matrix and recomposes.
pub fn sym_func(a: &Array2<f64>, f: impl Fn(f64) -> f64) -> Array2<f64> {
    let (vals, vecs) = sym_eig(a);
    let n = a.nrows();
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let fv = f(vals[k]);
        for i in 0..n {
            for j in 0..n {
                out[[i, j]] += fv * vecs[[i, k]] * vecs[[j, k]];
            }
        }
    }
    out
}

/// Symmetric square root with eigenvalues clipped at zero, so that nearly
/// positive semidefinite inputs do not produce NaNs.
pub fn sym_sqrt_clipped(a: &Array2<f64>) -> Array2<f64> {
    sym_func(a, |v| v.max(0.0).sqrt())
}

/// Largest eigenvalue of a symmetric matrix.
pub fn sym_lambda_max(a: &Array2<f64>) -> f64 {
    sym_eig(a).0[0]
}

/// `log det` of a symmetric matrix, or `None` when any eigenvalue is
/// nonpositive.
pub fn sym_logdet_pd(a: &Array2<f64>) -> Option<f64> {
    let (vals, _) = sym_eig(a);
    let mut acc = 0.0;
    for &v in vals.iter() {
        if v <= 0.0 {
            return None;
        }
        acc += v.ln();
    }
    Some(acc)
}

/// Inverse of a symmetric positive definite matrix via its eigendecomposition.
pub fn sym_inv_pd(a: &Array2<f64>) -> Array2<f64> {
    sym_func(a, |v| 1.0 / v)
}
