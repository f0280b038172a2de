//! Dense symmetric linear algebra on top of faer.

use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
///
/// Each eigenvector is sign-normalized so that its largest-magnitude
/// component is positive.
pub(crate) struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Columns are Euclidean-orthonormal eigenvectors.
    pub vectors: Mat<f64>,
}

pub(crate) fn max_asymmetry(a: &Mat<f64>) -> f64 {
    let n = a.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn symmetric_eigen(a: &Mat<f64>) -> Result<SymmetricEigen> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidParameter(format!(
            "matrix is not square: {} x {}",
            n,
            a.ncols()
        )));
    }
    let evd = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| Error::NoConvergence)?;
    let s = evd.S();
    let u = evd.U();
    // faer returns ascending eigenvalues.
    let mut values = Vec::with_capacity(n);
    let mut vectors = Mat::<f64>::zeros(n, n);
    for (dst, src) in (0..n).rev().enumerate() {
        values.push(s[src]);
        let mut pivot = 0.0f64;
        for i in 0..n {
            let v = u[(i, src)];
            if v.abs() > pivot.abs() {
                pivot = v;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * u[(i, src)];
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence);
    }
    Ok(SymmetricEigen { values, vectors })
}

/// `Aᵀx` for the first `cols` columns of `a`.
pub(crate) fn project(a: &Mat<f64>, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..cols)
        .map(|c| (0..a.nrows()).map(|r| a[(r, c)] * x[r]).sum())
        .collect()
}

/// `Σ_c coeffs[c] · a[:, c]` over the first `coeffs.len()` columns.
pub(crate) fn combine(a: &Mat<f64>, coeffs: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    for (c, &w) in coeffs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o += w * a[(r, c)];
        }
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
