//! Transfer functions `e(s)/d(s)`, validation of the distinct-stable-pole
//! assumptions, and H2 norms by residue calculus.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::Polynomial;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Real strictly proper rational function with a monic denominator.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    numerator: Polynomial,
    denominator: Polynomial,
}

impl TransferFunction {
    /// Builds from descending real coefficients. The denominator is made monic by
    /// dividing both polynomials by its leading coefficient.
    pub fn new(numerator: &[f64], denominator: &[f64]) -> Result<Self> {
        Self::from_polynomials(Polynomial::from_real(numerator), Polynomial::from_real(denominator))
    }

    pub fn from_polynomials(numerator: Polynomial, denominator: Polynomial) -> Result<Self> {
        if denominator.is_zero() {
            return Err(Error::InvalidSystem("zero denominator".into()));
        }
        if !numerator.is_real() || !denominator.is_real() {
            return Err(Error::InvalidSystem("coefficients must be real".into()));
        }
        if [&numerator, &denominator].iter().any(|p| p.coeffs().iter().any(|c| !c.re.is_finite())) {
            return Err(Error::InvalidSystem("coefficients must be finite".into()));
        }
        if !numerator.is_zero() && numerator.degree() >= denominator.degree() {
            return Err(Error::NotStrictlyProper { num_degree: numerator.degree(), den_degree: denominator.degree() });
        }
        let lead = denominator.leading();
        Ok(TransferFunction { numerator: numerator.scale(lead.inv()), denominator: denominator.monic() })
    }

    /// Splits off the direct feedthrough term of a proper (not necessarily strictly
    /// proper) rational function, returning the strictly proper part and the constant.
    pub fn strip_feedthrough(numerator: &[f64], denominator: &[f64]) -> Result<(Self, f64)> {
        let num = Polynomial::from_real(numerator);
        let den = Polynomial::from_real(denominator);
        if den.is_zero() {
            return Err(Error::InvalidSystem("zero denominator".into()));
        }
        if !num.is_zero() && num.degree() > den.degree() {
            return Err(Error::InvalidSystem(format!(
                "improper transfer function: numerator degree {} > denominator degree {}",
                num.degree(),
                den.degree()
            )));
        }
        let (quot, rem) = num.div_rem(&den)?;
        let feedthrough = quot.coeff(0).re;
        Ok((Self::from_polynomials(rem.real_part(), den)?, feedthrough))
    }

    pub fn numerator(&self) -> &Polynomial {
        &self.numerator
    }

    pub fn denominator(&self) -> &Polynomial {
        &self.denominator
    }

    pub fn order(&self) -> usize {
        self.denominator.degree()
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        self.numerator.eval(s) / self.denominator.eval(s)
    }

    /// Poles (companion eigenvalues of the denominator) and residues `e(p)/d'(p)`.
    pub fn pole_residue(&self) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        if self.order() == 0 {
            return Ok((Vec::new(), Vec::new()));
        }
        let poles = self.denominator.roots_with(true)?.into_iter().map(|r| r.value).collect::<Vec<_>>();
        let dprime = self.denominator.derivative();
        let residues = poles.iter().map(|&p| self.numerator.eval(p) / dprime.eval(p)).collect();
        Ok((poles, residues))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationTolerances {
    /// Minimum pairwise pole distance relative to the largest pole modulus.
    pub separation: f64,
    /// `|e(δ)| < coprime · Σ_k |e_k| |δ|^k` is treated as pole-zero cancellation:
    /// the numerator value is compared with the magnitude of the terms it sums.
    pub coprime: f64,
    /// One Newton step on each computed pole.
    pub polish_poles: bool,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        ValidationTolerances { separation: 1e-7, coprime: 1e-10, polish_poles: false }
    }
}

/// A transfer function that satisfies the standing assumptions, with the pole
/// evaluations used throughout the reduction pipeline cached.
///
/// Poles are sorted by real part, then imaginary part; this order fixes the
/// indexing of `ξ`, the rows of `M` and the criterion weights downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedSystem {
    tf: TransferFunction,
    poles: Vec<Complex64>,
    e_at_poles: Vec<Complex64>,
    dprime_at_poles: Vec<Complex64>,
    d_at_minus_poles: Vec<Complex64>,
}

impl ValidatedSystem {
    pub fn tf(&self) -> &TransferFunction {
        &self.tf
    }

    pub fn n(&self) -> usize {
        self.poles.len()
    }

    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    pub fn e_at_poles(&self) -> &[Complex64] {
        &self.e_at_poles
    }

    pub fn dprime_at_poles(&self) -> &[Complex64] {
        &self.dprime_at_poles
    }

    pub fn d_at_minus_poles(&self) -> &[Complex64] {
        &self.d_at_minus_poles
    }

    pub fn residues(&self) -> Vec<Complex64> {
        self.e_at_poles.iter().zip(&self.dprime_at_poles).map(|(e, d)| e / d).collect()
    }

    /// Index permutation pairing each pole with its complex conjugate (real poles map to themselves).
    pub fn conjugate_permutation(&self) -> Vec<usize> {
        conjugate_permutation(&self.poles)
    }
}

pub(crate) fn conjugate_permutation(poles: &[Complex64]) -> Vec<usize> {
    poles
        .iter()
        .map(|p| {
            let target = p.conj();
            (0..poles.len())
                .min_by(|&a, &b| (poles[a] - target).norm().partial_cmp(&(poles[b] - target).norm()).unwrap())
                .unwrap()
        })
        .collect()
}

fn sort_poles(poles: &mut [Complex64]) {
    poles.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap().then(a.im.partial_cmp(&b.im).unwrap()));
}

/// Snaps computed roots of a real polynomial onto an exactly conjugate-closed set:
/// nearly-real roots become real and conjugate pairs are symmetrised.
fn conjugate_cleanup(roots: &mut [Complex64]) {
    let n = roots.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| roots[b].im.abs().partial_cmp(&roots[a].im.abs()).unwrap());
    let mut used = vec![false; n];
    for &i in &order {
        if used[i] {
            continue;
        }
        used[i] = true;
        let target = roots[i].conj();
        let partner = (0..n)
            .filter(|&j| !used[j])
            .min_by(|&a, &b| (roots[a] - target).norm().partial_cmp(&(roots[b] - target).norm()).unwrap());
        match partner {
            Some(j) if (roots[j] - target).norm() < 2.0 * roots[i].im.abs() => {
                used[j] = true;
                let avg = (roots[i] + roots[j].conj()) * 0.5;
                roots[i] = avg;
                roots[j] = avg.conj();
            }
            _ => roots[i].im = 0.0,
        }
    }
}

fn check_poles(poles: &[Complex64], tol: &ValidationTolerances) -> Result<()> {
    if let Some(&pole) = poles.iter().find(|p| !(p.re < 0.0)) {
        return Err(Error::UnstablePole { pole });
    }
    let scale = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
    for i in 0..poles.len() {
        for j in i + 1..poles.len() {
            if (poles[i] - poles[j]).norm() < tol.separation * scale {
                return Err(Error::RepeatedPole { i, j, pi: poles[i], pj: poles[j] });
            }
        }
    }
    Ok(())
}

/// Checks stability, pole distinctness and coprimality, and caches the pole evaluations.
pub fn validate(tf: &TransferFunction, tol: &ValidationTolerances) -> Result<ValidatedSystem> {
    let e = tf.numerator();
    let d = tf.denominator();
    if !e.is_zero() && e.degree() >= d.degree() {
        return Err(Error::NotStrictlyProper { num_degree: e.degree(), den_degree: d.degree() });
    }
    if d.degree() == 0 {
        return Err(Error::InvalidSystem("denominator has degree zero".into()));
    }
    let mut poles: Vec<Complex64> = d.roots_with(tol.polish_poles)?.into_iter().map(|r| r.value).collect();
    conjugate_cleanup(&mut poles);
    sort_poles(&mut poles);
    check_poles(&poles, tol)?;

    let e_at_poles: Vec<Complex64> = poles.iter().map(|&p| e.eval(p)).collect();
    for (&pole, v) in poles.iter().zip(&e_at_poles) {
        let scale: f64 = e.coeffs().iter().fold(0.0, |acc, c| acc * pole.norm() + c.norm());
        if e.is_zero() || v.norm() < tol.coprime * scale {
            return Err(Error::PoleZeroCancellation { pole, value: v.norm() });
        }
    }
    let dprime = d.derivative();
    Ok(ValidatedSystem {
        tf: tf.clone(),
        dprime_at_poles: poles.iter().map(|&p| dprime.eval(p)).collect(),
        d_at_minus_poles: poles.iter().map(|&p| d.eval(-p)).collect(),
        e_at_poles,
        poles,
    })
}

/// Builds a validated system directly from poles and residues, `Σ r_i/(s − δ_i)`.
///
/// The poles are used as given (no root finding); the pole set and the residues
/// must each be closed under conjugation so that the system is real.
pub fn from_pole_residue(
    poles: &[Complex64],
    residues: &[Complex64],
    tol: &ValidationTolerances,
) -> Result<ValidatedSystem> {
    if poles.len() != residues.len() {
        return Err(Error::Input(format!("{} poles but {} residues", poles.len(), residues.len())));
    }
    if poles.is_empty() {
        return Err(Error::Input("at least one pole is required".into()));
    }
    let mut pairs: Vec<(Complex64, Complex64)> = poles.iter().copied().zip(residues.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.re.partial_cmp(&b.0.re).unwrap().then(a.0.im.partial_cmp(&b.0.im).unwrap()));
    let poles: Vec<Complex64> = pairs.iter().map(|p| p.0).collect();
    let residues: Vec<Complex64> = pairs.iter().map(|p| p.1).collect();
    check_poles(&poles, tol)?;

    let scale = poles.iter().map(|p| p.norm()).fold(0.0, f64::max);
    let rscale = residues.iter().map(|r| r.norm()).fold(0.0, f64::max);
    let perm = conjugate_permutation(&poles);
    for (i, &j) in perm.iter().enumerate() {
        if (poles[j] - poles[i].conj()).norm() > 1e-12 * scale {
            return Err(Error::NonConjugatePoles { pole: poles[i] });
        }
        if (residues[j] - residues[i].conj()).norm() > 1e-12 * rscale {
            return Err(Error::Input(format!("residue at pole {} is not conjugate to its partner", poles[i])));
        }
    }
    if let Some(k) = residues.iter().position(|r| r.norm() <= tol.coprime * rscale || *r == ZERO) {
        return Err(Error::PoleZeroCancellation { pole: poles[k], value: residues[k].norm() });
    }

    let d = Polynomial::from_roots(&poles);
    let mut e = Polynomial::zero();
    for (i, r) in residues.iter().enumerate() {
        let others: Vec<Complex64> = poles.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &p)| p).collect();
        e = &e + &Polynomial::from_roots(&others).scale(*r);
    }
    let tf = TransferFunction::from_polynomials(e.real_part(), d.real_part())?;
    let d = tf.denominator().clone();
    let dprime = d.derivative();
    let dprime_at_poles: Vec<Complex64> = poles.iter().map(|&p| dprime.eval(p)).collect();
    Ok(ValidatedSystem {
        e_at_poles: residues.iter().zip(&dprime_at_poles).map(|(r, dp)| r * dp).collect(),
        d_at_minus_poles: poles.iter().map(|&p| d.eval(-p)).collect(),
        dprime_at_poles,
        tf,
        poles,
    })
}

/// `⟨G, H⟩ = Σ_{i,j} r_i ρ_j / (−p_i − π_j)` for `G = Σ r_i/(s−p_i)`, `H = Σ ρ_j/(s−π_j)`.
///
/// For real systems the value is real; the complex value is returned so callers can
/// audit the imaginary residue.
pub fn pole_residue_inner(
    poles_a: &[Complex64],
    res_a: &[Complex64],
    poles_b: &[Complex64],
    res_b: &[Complex64],
) -> Complex64 {
    let mut acc = ZERO;
    for (p, r) in poles_a.iter().zip(res_a) {
        for (q, s) in poles_b.iter().zip(res_b) {
            acc += r * s / (-p - q);
        }
    }
    acc
}

pub fn h2_norm_squared(sys: &ValidatedSystem) -> f64 {
    let r = sys.residues();
    pole_residue_inner(&sys.poles, &r, &sys.poles, &r).re
}

pub fn h2_norm(sys: &ValidatedSystem) -> f64 {
    h2_norm_squared(sys).max(0.0).sqrt()
}

/// `‖e/d − b/a‖₂²` from the merged partial fractions of both systems.
pub fn h2_distance_squared(sys: &ValidatedSystem, approx: &TransferFunction) -> Result<f64> {
    let (ap, ar) = approx.pole_residue()?;
    if let Some(&pole) = ap.iter().find(|p| !(p.re < 0.0)) {
        return Err(Error::UnstableApproximant { pole });
    }
    let mut poles = sys.poles.clone();
    let mut res = sys.residues();
    poles.extend_from_slice(&ap);
    res.extend(ar.iter().map(|r| -r));
    Ok(pole_residue_inner(&poles, &res, &poles, &res).re)
}

pub fn h2_distance(sys: &ValidatedSystem, approx: &TransferFunction) -> Result<f64> {
    Ok(h2_distance_squared(sys, approx)?.max(0.0).sqrt())
}
