//! First-order optimality conditions for reduction by one degree.
//!
//! With `x_i = ã(−δ_i)` where `ã = q0·a`, the conditions become the
//! diagonal-quadratic system `x_i^2 = (M x)_i` with
//! `M = diag(e(δ)) · V(δ) · V(−δ)^{-1}`. This module builds `M` and maps
//! solutions `ξ` back to candidate approximants `b/a`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::poly::{self, Polynomial, DEFAULT_HURWITZ_TOL, VANDERMONDE_SEPARATION_TOL};
use crate::reduce;
use crate::tf::{TransferFunction, ValidatedSystem};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative residual allowed for `M V(−δ) = diag(e(δ)) V(δ)`.
pub const DEFAULT_M_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryTolerances {
    /// `|ã_{N−1}| ≤ q0 · ||ã||` is rejected as a degenerate leading coefficient.
    pub q0: f64,
    /// Realness margin on the monic `a`, relative to `1 + max|a_k|`.
    pub real: f64,
    /// Hurwitz margin: every root must satisfy `Re < −hurwitz`.
    pub hurwitz: f64,
}

impl Default for RecoveryTolerances {
    fn default() -> Self {
        RecoveryTolerances { q0: 1e-10, real: 1e-6, hurwitz: DEFAULT_HURWITZ_TOL }
    }
}

/// A solution of the first-order conditions mapped back to `(a, b, q0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub xi: Vec<Complex64>,
    /// Monic, degree `N − 1`.
    pub a: Polynomial,
    /// Degree at most `N − 2`.
    pub b: Polynomial,
    pub q0: Complex64,
    pub criterion: Complex64,
    pub is_real: bool,
    pub is_hurwitz: bool,
    /// Largest imaginary part among the coefficients of `a` before snapping, relative.
    pub imag_margin: f64,
    /// Largest real part among the roots of `a` (for real candidates).
    pub max_pole_real: Option<f64>,
    pub foc_residual: f64,
    pub ls_residual: f64,
}

impl CriticalPoint {
    pub fn is_admissible(&self) -> bool {
        self.is_real && self.is_hurwitz
    }

    /// The approximant `b/a`; only meaningful for real candidates.
    pub fn approximant(&self) -> Result<TransferFunction> {
        TransferFunction::from_polynomials(self.b.real_part(), self.a.real_part())
    }
}

/// `M` together with the residual of its defining identity.
#[derive(Debug, Clone)]
pub struct MatrixM {
    pub m: CMat,
    pub residual: f64,
    /// 2-norm condition number of `V(−δ)`.
    pub vandermonde_cond: f64,
}

pub fn build_m(sys: &ValidatedSystem) -> Result<MatrixM> {
    build_m_with(sys, DEFAULT_M_RESIDUAL_TOL)
}

/// Builds `M = diag(e(δ)) V(δ) V(−δ)^{-1}` by solving `V(−δ)^T Xᵀ = V(δ)^T`.
pub fn build_m_with(sys: &ValidatedSystem, residual_tol: f64) -> Result<MatrixM> {
    let n = sys.n();
    let plus = sys.poles().to_vec();
    let minus: Vec<Complex64> = plus.iter().map(|p| -p).collect();
    poly::check_separation(&minus, VANDERMONDE_SEPARATION_TOL)?;
    let v_plus = poly::vandermonde(&plus);
    let v_minus = poly::vandermonde(&minus);
    let xt = linalg::lu_solve(&v_minus.transpose().to_owned(), &v_plus.transpose().to_owned())?;
    let e = sys.e_at_poles();
    let m = CMat::from_fn(n, n, |i, j| e[i] * xt[(j, i)]);

    let target = CMat::from_fn(n, n, |i, j| e[i] * v_plus[(i, j)]);
    let diff = &linalg::matmul(&m, &v_minus) - &target;
    let residual = linalg::frobenius(&diff) / linalg::frobenius(&target);
    let vandermonde_cond = linalg::condition_number(&v_minus)?;
    if !(residual <= residual_tol) {
        return Err(Error::IllConditioned { what: "M construction residual", cond: residual, limit: residual_tol });
    }
    Ok(MatrixM { m, residual, vandermonde_cond })
}

/// `||ξ||∞ ≤ 1e−8 · (1 + ||M||∞)` marks the excluded zero solution.
/// Diagonal variable scaling `x = S y` that balances the quadratic system.
///
/// Under the substitution the system becomes `y_i^2 = Σ_j m_ij s_j / s_i^2 · y_j`;
/// the scales are the fixed point of `s_i^2 = max_j |m_ij| s_j`, which puts the
/// largest entry of every row of the scaled matrix at one. Solutions of widely
/// separated magnitude are otherwise resolved poorly by the eigen-solvers.
pub fn balancing_scales(m: &CMat) -> Vec<f64> {
    let n = m.nrows();
    let logs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m[(i, j)].norm().ln()).collect()).collect();
    let mut t = vec![0.0f64; n];
    for _ in 0..200 {
        let mut change = 0.0f64;
        for i in 0..n {
            let best = (0..n).map(|j| logs[i][j] + t[j]).fold(f64::NEG_INFINITY, f64::max);
            if best.is_finite() {
                let next = 0.5 * best;
                change = change.max((next - t[i]).abs());
                t[i] = next;
            }
        }
        if change < 1e-6 {
            break;
        }
    }
    t.iter().map(|x| x.exp()).collect()
}

/// The matrix of the scaled system `y_i^2 = (M' y)_i` for `x = S y`.
pub fn scale_m(m: &CMat, scales: &[f64]) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (scales[j] / (scales[i] * scales[i])))
}

/// `max_i |x_i^2 − (M x)_i|` relative to the size of the terms.
pub fn quadratic_residual(m: &CMat, x: &[Complex64]) -> f64 {
    let mx = linalg::matvec(m, x);
    let scale = x.iter().zip(&mx).map(|(xi, r)| xi.norm_sqr().max(r.norm())).fold(0.0, f64::max);
    let worst = x.iter().zip(&mx).map(|(xi, r)| (xi * xi - r).norm()).fold(0.0, f64::max);
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Polishes an approximate solution of `x∘x = M x` with Newton steps on the
/// Jacobian `2 diag(x) − M`, keeping a step only when it lowers the residual.
pub fn refine_solution(m: &CMat, x: &[Complex64], max_steps: usize) -> Vec<Complex64> {
    let n = x.len();
    let mut cur = x.to_vec();
    let mut res = quadratic_residual(m, &cur);
    for _ in 0..max_steps {
        if res <= f64::EPSILON {
            break;
        }
        let mx = linalg::matvec(m, &cur);
        let f: Vec<Complex64> = cur.iter().zip(&mx).map(|(xi, r)| xi * xi - r).collect();
        let jac = CMat::from_fn(n, n, |i, j| if i == j { cur[i] * 2.0 - m[(i, j)] } else { -m[(i, j)] });
        let Ok(step) = linalg::lu_solve(&jac, &linalg::column(&f)) else { break };
        let next: Vec<Complex64> = (0..n).map(|i| cur[i] - step[(i, 0)]).collect();
        let next_res = quadratic_residual(m, &next);
        if !(next_res < res) {
            break;
        }
        cur = next;
        res = next_res;
    }
    cur
}

pub fn is_zero_solution(xi: &[Complex64], m_norm_inf: f64) -> bool {
    linalg::vec_norm_inf(xi) <= 1e-8 * (1.0 + m_norm_inf)
}

/// Recovers `ã` from `V(−δ) ã = ξ`, normalises to monic `a`, classifies it and
/// fits `b` by least squares on `b·d = e·a − q0·a(−s)^2`.
pub fn recover_candidate(sys: &ValidatedSystem, xi: &[Complex64], tol: &RecoveryTolerances) -> Result<CriticalPoint> {
    let n = sys.n();
    if xi.len() != n {
        return Err(Error::Dimension(format!("ξ has {} entries, system order is {n}", xi.len())));
    }
    let minus: Vec<Complex64> = sys.poles().iter().map(|p| -p).collect();
    let atilde = poly::vandermonde_solve(&minus, xi)?;
    let mut q0 = atilde[n - 1];
    let norm = linalg::vec_norm(&atilde);
    if !(q0.norm() > tol.q0 * norm) {
        return Err(Error::DegenerateLeadingCoefficient { q0: q0.norm(), norm });
    }
    let mut a = Polynomial::from_ascending(&atilde).scale(q0.inv());
    let scale = 1.0 + a.norm_inf();
    let imag_margin = a.max_imag().max(q0.im.abs() / q0.norm()) / scale;
    let is_real = imag_margin <= tol.real;
    let mut max_pole_real = None;
    let mut is_hurwitz = false;
    if is_real {
        a = a.real_part();
        q0 = Complex64::new(q0.re, 0.0);
        if a.degree() == 0 {
            is_hurwitz = true;
        } else {
            let roots = a.roots_with(true)?;
            let worst = roots.iter().map(|r| r.value.re).fold(f64::NEG_INFINITY, f64::max);
            max_pole_real = Some(worst);
            is_hurwitz = worst < -tol.hurwitz;
        }
    }

    let (b, ls_residual) = fit_numerator(sys, &a, q0, is_real)?;
    let mut cp = CriticalPoint {
        xi: xi.to_vec(),
        criterion: reduce::critical_value(sys, xi),
        a,
        b,
        q0,
        is_real,
        is_hurwitz,
        imag_margin,
        max_pole_real,
        foc_residual: 0.0,
        ls_residual,
    };
    cp.foc_residual = foc_residual(sys, &cp);
    Ok(cp)
}

/// Least-squares `b` (degree ≤ N−2) with relative residual.
fn fit_numerator(sys: &ValidatedSystem, a: &Polynomial, q0: Complex64, real: bool) -> Result<(Polynomial, f64)> {
    let n = sys.n();
    let e = sys.tf().numerator();
    let d = sys.tf().denominator();
    let ar = a.reflect();
    let ea = e * a;
    let sq = (&ar * &ar).scale(q0);
    let rhs_poly = &ea - &sq;
    let rows = 2 * n - 1;
    let rhs: Vec<Complex64> = (0..rows).map(|k| rhs_poly.coeff(k)).collect();
    // The right-hand side is a difference of two terms that nearly cancel
    // when the approximant is good; residuals are measured against the terms.
    let scale = ea.norm2().max(sq.norm2());
    let relative = |r: f64| if scale > 0.0 { r / scale } else { r };
    let unknowns = n - 1;
    if unknowns == 0 {
        return Ok((Polynomial::zero(), relative(linalg::vec_norm(&rhs))));
    }
    let conv = CMat::from_fn(rows, unknowns, |k, j| if k >= j { d.coeff(k - j) } else { ZERO });
    let sol = linalg::lstsq(&conv, &linalg::column(&rhs))?;
    let mut coeffs = linalg::column_to_vec(&sol, 0);
    if real {
        for c in coeffs.iter_mut() {
            c.im = 0.0;
        }
    }
    let fitted = linalg::matvec(&conv, &coeffs);
    let resid: Vec<Complex64> = fitted.iter().zip(&rhs).map(|(f, r)| f - r).collect();
    let ls = relative(linalg::vec_norm(&resid));
    Ok((Polynomial::from_ascending(&coeffs), ls))
}

/// Relative max-coefficient residual of `e·a − b·d = q0·a(−s)^2`.
pub fn foc_residual(sys: &ValidatedSystem, cp: &CriticalPoint) -> f64 {
    let e = sys.tf().numerator();
    let d = sys.tf().denominator();
    let ea = e * &cp.a;
    let bd = &cp.b * d;
    let ar = cp.a.reflect();
    let rhs = (&ar * &ar).scale(cp.q0);
    let diff = &(&ea - &bd) - &rhs;
    let scale = ea.norm_inf().max(bd.norm_inf()).max(rhs.norm_inf());
    if scale == 0.0 {
        0.0
    } else {
        diff.norm_inf() / scale
    }
}
