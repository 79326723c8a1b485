//! Dense univariate polynomials with complex coefficients.
//!
//! Coefficients are stored in descending degree order, so `[1, 3, 2]` is
//! `s^2 + 3s + 2`. The zero polynomial is the single coefficient `0`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default margin for [`Polynomial::is_hurwitz`].
pub const DEFAULT_HURWITZ_TOL: f64 = 1e-9;

/// Relative node separation below which a Vandermonde solve is refused.
pub const VANDERMONDE_SEPARATION_TOL: f64 = 1e-8;

#[derive(Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Polynomial").field(&self.coeffs).finish()
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let deg = self.degree();
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == ZERO && deg > 0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.im == 0.0 {
                write!(f, "{}", c.re)?;
            } else {
                write!(f, "({}{:+}i)", c.re, c.im)?;
            }
            match deg - k {
                0 => {}
                1 => write!(f, " s")?,
                p => write!(f, " s^{p}")?,
            }
        }
        Ok(())
    }
}

/// A root together with its relative residual `|p(root)| / ||p||`.
#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub value: Complex64,
    pub residual: f64,
}

impl Polynomial {
    /// Builds a polynomial from descending coefficients, dropping exact leading zeros.
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        let first = coeffs.iter().position(|c| *c != ZERO);
        match first {
            Some(k) => Polynomial { coeffs: coeffs[k..].to_vec() },
            None => Self::zero(),
        }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    /// Builds from ascending-order coefficients (the layout of [`vandermonde_solve`]).
    pub fn from_ascending(coeffs: &[Complex64]) -> Self {
        Self::new(coeffs.iter().rev().copied().collect())
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![ZERO] }
    }

    pub fn constant(c: Complex64) -> Self {
        Polynomial { coeffs: vec![c] }
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[Complex64]) -> Self {
        let mut p = Self::constant(ONE);
        for &r in roots {
            p = &p * &Polynomial { coeffs: vec![ONE, -r] };
        }
        p
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn ascending(&self) -> Vec<Complex64> {
        self.coeffs.iter().rev().copied().collect()
    }

    /// Coefficient of `s^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> Complex64 {
        let deg = self.degree();
        if k > deg {
            ZERO
        } else {
            self.coeffs[deg - k]
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == ZERO
    }

    pub fn leading(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }

    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn norm_inf(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn norm2(&self) -> f64 {
        linalg::vec_norm(&self.coeffs)
    }

    /// Real parts of the coefficients, descending.
    pub fn real_coeffs(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.re).collect()
    }

    /// Drops imaginary parts.
    pub fn real_part(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| Complex64::new(c.re, 0.0)).collect())
    }

    pub fn conj(&self) -> Self {
        Polynomial { coeffs: self.coeffs.iter().map(|c| c.conj()).collect() }
    }

    pub fn scale(&self, k: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * k).collect())
    }

    pub fn monic(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let lead = self.leading();
        Polynomial { coeffs: self.coeffs.iter().map(|c| c / lead).collect() }
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.coeffs.iter().fold(ZERO, |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Self {
        let deg = self.degree();
        if deg == 0 {
            return Self::zero();
        }
        Self::new(self.coeffs[..deg].iter().enumerate().map(|(k, &c)| c * (deg - k) as f64).collect())
    }

    /// `s ↦ p(−s)`.
    pub fn reflect(&self) -> Self {
        let deg = self.degree();
        Polynomial {
            coeffs: self.coeffs.iter().enumerate().map(|(k, &c)| if (deg - k) % 2 == 1 { -c } else { c }).collect(),
        }
    }

    /// Polynomial long division, returning `(quotient, remainder)`.
    pub fn div_rem(&self, divisor: &Polynomial) -> Result<(Polynomial, Polynomial)> {
        if divisor.is_zero() {
            return Err(Error::InvalidSystem("division by the zero polynomial".into()));
        }
        let dd = divisor.degree();
        if self.degree() < dd || self.is_zero() {
            return Ok((Self::zero(), self.clone()));
        }
        let mut rem = self.coeffs.clone();
        let qlen = self.degree() - dd + 1;
        let mut quot = vec![ZERO; qlen];
        for k in 0..qlen {
            let q = rem[k] / divisor.coeffs[0];
            quot[k] = q;
            for (j, &dc) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * dc;
            }
        }
        let rem = if dd == 0 { vec![ZERO] } else { rem[qlen..].to_vec() };
        Ok((Self::new(quot), Self::new(rem)))
    }

    /// All roots with multiplicity, as eigenvalues of the balanced companion matrix.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        Ok(self.roots_with(false)?.into_iter().map(|r| r.value).collect())
    }

    /// Roots with per-root relative residuals; `polish` applies one Newton step to each.
    pub fn roots_with(&self, polish: bool) -> Result<Vec<Root>> {
        if self.degree() == 0 {
            return Err(Error::NoRoots);
        }
        let monic = self.monic();
        let n = monic.degree();
        let mut values = if n == 1 {
            vec![-monic.coeffs[1]]
        } else {
            let mut c = linalg::zeros(n, n);
            for j in 0..n {
                c[(0, j)] = -monic.coeffs[j + 1];
            }
            for i in 1..n {
                c[(i, i - 1)] = ONE;
            }
            balance(&mut c);
            linalg::eigenvalues(&c)?
        };
        if polish {
            let dp = monic.derivative();
            for v in values.iter_mut() {
                let d = dp.eval(*v);
                if d != ZERO {
                    let step = monic.eval(*v) / d;
                    if step.re.is_finite() && step.im.is_finite() {
                        *v -= step;
                    }
                }
            }
        }
        let scale = monic.norm2();
        Ok(values.into_iter().map(|value| Root { value, residual: monic.eval(value).norm() / scale }).collect())
    }

    /// True iff every root has real part below `-tol`. Constants are vacuously Hurwitz.
    pub fn is_hurwitz(&self, tol: f64) -> Result<bool> {
        if !self.is_real() {
            return Err(Error::NonRealPolynomial { max_imag: self.max_imag() });
        }
        if self.degree() == 0 {
            return Ok(true);
        }
        Ok(self.roots()?.iter().all(|r| r.re < -tol))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![ZERO; n];
        for (k, c) in self.coeffs.iter().rev().enumerate() {
            out[n - 1 - k] += c;
        }
        for (k, c) in rhs.coeffs.iter().rev().enumerate() {
            out[n - 1 - k] += c;
        }
        Polynomial::new(out)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = vec![ZERO; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }
}

/// Parlett–Reinsch diagonal similarity balancing (radix 2), in place.
fn balance(a: &mut CMat) {
    let n = a.nrows();
    let radix = 2.0_f64;
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].norm();
                    r += a[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let mut rr = r;
            while cc < rr / radix {
                f *= radix;
                cc *= radix;
                rr /= radix;
            }
            while cc >= rr * radix {
                f /= radix;
                cc /= radix;
                rr *= radix;
            }
            if (cc + rr) < 0.95 * s {
                converged = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Vandermonde matrix with rows `(1, x, x^2, …, x^{n-1})`.
pub fn vandermonde(nodes: &[Complex64]) -> CMat {
    let n = nodes.len();
    CMat::from_fn(n, n, |i, j| nodes[i].powu(j as u32))
}

/// Rejects node sets whose minimum pairwise distance is below `rel_tol · max|node|`.
pub fn check_separation(nodes: &[Complex64], rel_tol: f64) -> Result<()> {
    let scale = nodes.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for i in 0..nodes.len() {
        for j in i + 1..nodes.len() {
            let distance = (nodes[i] - nodes[j]).norm();
            if distance < rel_tol * scale || distance == 0.0 {
                return Err(Error::NodesTooClose { i, j, distance });
            }
        }
    }
    Ok(())
}

/// Solves `V(nodes) c = rhs`, returning `c` in ASCENDING degree order.
pub fn vandermonde_solve(nodes: &[Complex64], rhs: &[Complex64]) -> Result<Vec<Complex64>> {
    if nodes.len() != rhs.len() {
        return Err(Error::Dimension(format!("{} nodes but {} right-hand values", nodes.len(), rhs.len())));
    }
    if nodes.is_empty() {
        return Ok(Vec::new());
    }
    check_separation(nodes, VANDERMONDE_SEPARATION_TOL)?;
    let x = linalg::lu_solve(&vandermonde(nodes), &linalg::column(rhs))?;
    Ok(linalg::column_to_vec(&x, 0))
}
