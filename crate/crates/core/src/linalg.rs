//! Thin dense complex linear algebra layer over `faer`.

use faer::linalg::solvers::{Solve, SolveLstsq};
use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = Mat<Complex64>;

pub fn zeros(rows: usize, cols: usize) -> CMat {
    Mat::zeros(rows, cols)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
}

pub fn from_rows(rows: &[Vec<Complex64>]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn column(v: &[Complex64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn column_to_vec(m: &CMat, j: usize) -> Vec<Complex64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn frobenius(m: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

/// Max absolute row sum.
pub fn norm_inf(m: &CMat) -> f64 {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn vec_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn vec_norm_inf(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    a * b
}

pub fn matvec(a: &CMat, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.nrows()];
    for j in 0..a.ncols() {
        let vj = v[j];
        if vj == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (i, o) in out.iter_mut().enumerate() {
            *o += a[(i, j)] * vj;
        }
    }
    out
}

/// Solves `a x = b` by LU with partial pivoting.
pub fn lu_solve(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "LU solve of {}x{} system with {} right-hand rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    let x = a.partial_piv_lu().solve(b);
    if x.col_iter().any(|c| c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())) {
        return Err(Error::IllConditioned { what: "LU solve", cond: f64::INFINITY, limit: f64::MAX });
    }
    Ok(x)
}

/// Least-squares solution of an overdetermined `a x ≈ b` through Householder QR.
pub fn lstsq(a: &CMat, b: &CMat) -> Result<CMat> {
    if a.nrows() < a.ncols() || a.nrows() != b.nrows() {
        return Err(Error::Dimension(format!(
            "least squares with {}x{} matrix and {} right-hand rows",
            a.nrows(),
            a.ncols(),
            b.nrows()
        )));
    }
    if a.ncols() == 0 {
        return Ok(zeros(0, b.ncols()));
    }
    Ok(a.qr().solve_lstsq(b))
}

/// 2-norm condition number from the singular values.
pub fn condition_number(a: &CMat) -> Result<f64> {
    let s = a.singular_values().map_err(|e| Error::Eigen(format!("singular values: {e:?}")))?;
    let max = s.iter().cloned().fold(0.0, f64::max);
    let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min == 0.0 { f64::INFINITY } else { max / min })
}

/// Eigenvalues and right eigenvectors (as columns) of a general complex matrix.
pub fn eig(a: &CMat) -> Result<(Vec<Complex64>, CMat)> {
    let e = a.eigen().map_err(|e| Error::Eigen(format!("{e:?}")))?;
    let s = e.S();
    let values = (0..a.nrows()).map(|k| s[k]).collect();
    Ok((values, e.U().to_owned()))
}

pub fn eigenvalues(a: &CMat) -> Result<Vec<Complex64>> {
    a.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
}
