//! Diagonal-quadratic polynomial systems `x_i^2 = m_i·x + μ_i` and normal forms
//! modulo the ideal they generate.
//!
//! The generators `g_i = x_i^2 − m_i·x − μ_i` have pairwise coprime leading terms
//! under any degree-compatible order, so they form a Gröbner basis and every
//! polynomial has a unique normal form in the span of the `2^N` square-free
//! monomials. A square-free monomial is stored as a bitmask: bit `i` set means
//! the variable with zero-based index `i` appears. Index 0 is the constant `1`.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Default cap on the number of variables; `2^14` basis monomials.
pub const DEFAULT_CAP: usize = 14;

/// Default bound on intermediate term count in [`normal_form`].
pub const DEFAULT_REDUCTION_BUDGET: usize = 10_000_000;

/// The system `x_i^2 = Σ_k m_ik x_k + μ_i`, `i = 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagQuadSystem {
    m: Vec<Vec<Complex64>>,
    mu: Vec<Complex64>,
}

impl DiagQuadSystem {
    pub fn new(m: Vec<Vec<Complex64>>, mu: Vec<Complex64>) -> Result<Self> {
        Self::with_cap(m, mu, DEFAULT_CAP)
    }

    pub fn with_cap(m: Vec<Vec<Complex64>>, mu: Vec<Complex64>, cap: usize) -> Result<Self> {
        let n = m.len();
        if n == 0 {
            return Err(Error::Dimension("a diagonal-quadratic system needs at least one variable".into()));
        }
        if m.iter().any(|row| row.len() != n) || mu.len() != n {
            return Err(Error::Dimension(format!("M must be {n}x{n} and μ of length {n}")));
        }
        if n > cap {
            return Err(Error::BasisTooLarge { n, cap });
        }
        Ok(DiagQuadSystem { m, mu })
    }

    /// Homogeneous system (`μ = 0`) from a square matrix.
    pub fn homogeneous(m: &CMat, cap: usize) -> Result<Self> {
        let n = m.nrows();
        let rows = (0..n).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
        Self::with_cap(rows, vec![ZERO; n], cap)
    }

    pub fn n_vars(&self) -> usize {
        self.m.len()
    }

    pub fn dim(&self) -> usize {
        1 << self.n_vars()
    }

    pub fn m(&self) -> &[Vec<Complex64>] {
        &self.m
    }

    pub fn mu(&self) -> &[Complex64] {
        &self.mu
    }

    pub fn m_matrix(&self) -> CMat {
        linalg::from_rows(&self.m)
    }

    /// The generator `g_i = x_i^2 − m_i·x − μ_i`.
    pub fn generator(&self, i: usize) -> SparsePoly {
        let n = self.n_vars();
        let mut g = SparsePoly::zero(n);
        let mut sq = vec![0; n];
        sq[i] = 2;
        g.add_term(sq, ONE);
        for (k, &mik) in self.m[i].iter().enumerate() {
            let mut e = vec![0; n];
            e[k] = 1;
            g.add_term(e, -mik);
        }
        g.add_term(vec![0; n], -self.mu[i]);
        g
    }

    /// Residuals `x_i^2 − (M x)_i − μ_i` at a point.
    pub fn residuals(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n_vars())
            .map(|i| {
                let mx: Complex64 = self.m[i].iter().zip(x).map(|(a, b)| a * b).sum();
                x[i] * x[i] - mx - self.mu[i]
            })
            .collect()
    }
}

/// Sparse multivariate polynomial keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePoly {
    n: usize,
    terms: BTreeMap<Vec<u32>, Complex64>,
}

impl SparsePoly {
    pub fn zero(n: usize) -> Self {
        SparsePoly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        let mut p = Self::zero(n);
        p.add_term(vec![0; n], c);
        p
    }

    pub fn variable(n: usize, i: usize) -> Self {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Self::zero(n);
        p.add_term(e, ONE);
        p
    }

    pub fn monomial(exponents: Vec<u32>, c: Complex64) -> Self {
        let mut p = Self::zero(exponents.len());
        p.add_term(exponents, c);
        p
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<Vec<u32>, Complex64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Adds `c·x^exponents`, dropping the entry if it cancels to zero.
    pub fn add_term(&mut self, exponents: Vec<u32>, c: Complex64) {
        assert_eq!(exponents.len(), self.n, "exponent vector length must equal the variable count");
        if c == ZERO {
            return;
        }
        let entry = self.terms.entry(exponents);
        match entry {
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = *o.get() + c;
                if v == ZERO {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
        }
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let mut out = Self::zero(self.n);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * k);
        }
        out
    }

    pub fn add(&self, other: &SparsePoly) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn mul(&self, other: &SparsePoly) -> Self {
        let mut out = Self::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        self.terms.iter().map(|(e, c)| e.iter().zip(x).fold(*c, |acc, (&k, &xi)| acc * xi.powu(k))).sum()
    }
}

/// Coefficients of an element of the square-free span, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormElement {
    n: usize,
    coeffs: Vec<Complex64>,
}

impl NormalFormElement {
    pub fn zero(n: usize) -> Self {
        NormalFormElement { n, coeffs: vec![ZERO; 1 << n] }
    }

    pub fn basis_vector(n: usize, mask: usize) -> Self {
        let mut e = Self::zero(n);
        e.coeffs[mask] = ONE;
        e
    }

    pub fn from_coeffs(n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 1 << n {
            return Err(Error::Dimension(format!("expected {} coefficients, got {}", 1usize << n, coeffs.len())));
        }
        Ok(NormalFormElement { n, coeffs })
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn to_sparse(&self) -> SparsePoly {
        let mut p = SparsePoly::zero(self.n);
        for (mask, &c) in self.coeffs.iter().enumerate() {
            p.add_term(mask_exponents(self.n, mask), c);
        }
        p
    }

    pub fn max_abs_diff(&self, other: &NormalFormElement) -> f64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

fn mask_exponents(n: usize, mask: usize) -> Vec<u32> {
    (0..n).map(|i| ((mask >> i) & 1) as u32).collect()
}

/// The square-free exponent vectors `{0,1}^N` in increasing bitmask order.
pub fn basis_monomials(n_vars: usize, cap: usize) -> Result<Vec<Vec<u32>>> {
    if n_vars > cap {
        return Err(Error::BasisTooLarge { n: n_vars, cap });
    }
    if n_vars == 0 {
        return Err(Error::Dimension("at least one variable is required".into()));
    }
    Ok((0..1usize << n_vars).map(|mask| mask_exponents(n_vars, mask)).collect())
}

/// Which reducible term (and which variable in it) a reduction step rewrites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReductionStrategy {
    /// A term of maximal total degree; its variable with the largest exponent.
    #[default]
    HighestDegreeFirst,
    /// The term whose smallest reducible variable index is smallest; that variable.
    LowestVariableFirst,
}

pub fn normal_form(f: &SparsePoly, sys: &DiagQuadSystem) -> Result<NormalFormElement> {
    normal_form_with(f, sys, ReductionStrategy::default(), DEFAULT_REDUCTION_BUDGET)
}

/// Normal form by repeated reduction steps `x_i^2 → m_i·x + μ_i`.
pub fn normal_form_with(
    f: &SparsePoly,
    sys: &DiagQuadSystem,
    strategy: ReductionStrategy,
    budget: usize,
) -> Result<NormalFormElement> {
    let n = sys.n_vars();
    if f.n_vars() != n {
        return Err(Error::Dimension(format!("polynomial in {} variables, system in {n}", f.n_vars())));
    }
    let mut work = f.clone();
    loop {
        let pick = match strategy {
            ReductionStrategy::HighestDegreeFirst => {
                work.terms.keys().filter(|e| e.iter().any(|&k| k >= 2)).max_by_key(|e| e.iter().sum::<u32>()).map(|e| {
                    let (var, _) = e.iter().enumerate().max_by_key(|&(i, &k)| (k, std::cmp::Reverse(i))).unwrap();
                    (e.clone(), var)
                })
            }
            ReductionStrategy::LowestVariableFirst => work
                .terms
                .keys()
                .filter_map(|e| e.iter().position(|&k| k >= 2).map(|v| (e.clone(), v)))
                .min_by_key(|(_, v)| *v),
        };
        let Some((mono, var)) = pick else { break };
        let c = work.terms.remove(&mono).expect("picked term exists");
        let mut cofactor = mono;
        cofactor[var] -= 2;
        work.add_term(cofactor.clone(), c * sys.mu[var]);
        for (k, &mk) in sys.m[var].iter().enumerate() {
            let mut e = cofactor.clone();
            e[k] += 1;
            work.add_term(e, c * mk);
        }
        if work.terms.len() > budget {
            return Err(Error::ReductionBudgetExceeded { terms: work.terms.len(), budget });
        }
    }
    let mut out = NormalFormElement::zero(n);
    for (e, c) in work.terms {
        let mask = e.iter().enumerate().fold(0usize, |m, (i, &k)| m | ((k as usize) << i));
        out.coeffs[mask] += c;
    }
    Ok(out)
}

/// Multiplication by `x_i` modulo the ideal, on the square-free span.
pub fn multiply_by_variable(nf: &NormalFormElement, i: usize, sys: &DiagQuadSystem) -> NormalFormElement {
    let n = sys.n_vars();
    assert!(i < n, "variable index {i} out of range for {n} variables");
    let mut memo: HashMap<(usize, usize), Vec<Complex64>> = HashMap::new();
    let mut out = vec![ZERO; 1 << n];
    for (mask, &c) in nf.coeffs.iter().enumerate() {
        if c == ZERO {
            continue;
        }
        let col = times_monomial(i, mask, sys, &mut memo);
        for (o, v) in out.iter_mut().zip(col) {
            *o += c * v;
        }
    }
    NormalFormElement { n, coeffs: out }
}

/// Normal form of `x_var · x^mask`. If `var` is already in the mask, one substitution
/// `x_var^2 → m_var·x + μ_var` leaves products `x_l · x^(mask without var)` of lower
/// degree, which are reduced the same way.
fn times_monomial(
    var: usize,
    mask: usize,
    sys: &DiagQuadSystem,
    memo: &mut HashMap<(usize, usize), Vec<Complex64>>,
) -> Vec<Complex64> {
    if let Some(v) = memo.get(&(var, mask)) {
        return v.clone();
    }
    let dim = sys.dim();
    let bit = 1 << var;
    let mut out = vec![ZERO; dim];
    if mask & bit == 0 {
        out[mask | bit] = ONE;
    } else {
        let rest = mask ^ bit;
        out[rest] += sys.mu[var];
        for (l, &ml) in sys.m[var].iter().enumerate() {
            if ml == ZERO {
                continue;
            }
            let sub = times_monomial(l, rest, sys, memo);
            for (o, s) in out.iter_mut().zip(&sub) {
                *o += ml * s;
            }
        }
    }
    memo.insert((var, mask), out.clone());
    out
}
