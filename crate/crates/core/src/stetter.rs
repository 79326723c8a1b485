//! Multiplication matrices on the quotient ring `C[x]/I` of a diagonal-quadratic
//! ideal, and extraction of the solutions as common eigenvalue tuples.
//!
//! Column `β` of `A_{X_i}` holds the normal-form coefficients of `x_i · x^β`.
//! The matrices commute, and `f(A_{X_1}, …, A_{X_N})` is the matrix of
//! multiplication by `f`; in particular it vanishes for every generator.

use std::collections::HashMap;

use log::{debug, warn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dqideal::{DiagQuadSystem, SparsePoly};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Above this dimension the construction invariants are measured on random probe
/// vectors rather than by forming the full matrix products.
const FULL_CHECK_MAX_DIM: usize = 64;
const PROBE_VECTORS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StetterTolerances {
    /// Relative commutation defect allowed at construction.
    pub commutation: f64,
    /// Relative generator annihilation defect allowed at construction.
    pub annihilation: f64,
    /// Eigenvector residual `||A v − ξ_i v|| / (||v|| ||A||_F)` accepted per matrix.
    pub residual: f64,
    /// Two solutions closer than `cluster · (1 + max ||ξ||∞)` are merged.
    pub cluster: f64,
}

impl Default for StetterTolerances {
    fn default() -> Self {
        StetterTolerances { commutation: 1e-8, annihilation: 1e-8, residual: 1e-7, cluster: 1e-8 }
    }
}

/// How common eigenvectors are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenMethod {
    /// One eigendecomposition of a seeded random combination `Σ c_i A_{X_i}`.
    #[default]
    RandomCombination,
    /// Decompose every `A_{X_i}` and match eigenvectors by angle.
    PerMatrix,
}

#[derive(Debug, Clone)]
pub struct MultiplicationMatrices {
    n_vars: usize,
    matrices: Vec<CMat>,
    commutation_defect: f64,
    annihilation_defect: f64,
}

impl MultiplicationMatrices {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn dim(&self) -> usize {
        1 << self.n_vars
    }

    pub fn matrices(&self) -> &[CMat] {
        &self.matrices
    }

    pub fn matrix(&self, i: usize) -> &CMat {
        &self.matrices[i]
    }

    pub fn commutation_defect(&self) -> f64 {
        self.commutation_defect
    }

    pub fn annihilation_defect(&self) -> f64 {
        self.annihilation_defect
    }
}

pub fn build_multiplication_matrices(sys: &DiagQuadSystem) -> Result<MultiplicationMatrices> {
    build_multiplication_matrices_with(sys, &StetterTolerances::default())
}

/// Builds all `A_{X_i}` column by column in order of increasing monomial degree.
///
/// For `i ∉ β` the column is the basis vector of `x^{β ∪ i}`. Otherwise
/// `x_i x^β = x_i^2 x^{β∖i} → μ_i x^{β∖i} + Σ_l m_il x_l x^{β∖i}`, and the
/// columns for `β ∖ i` have lower degree, so they are already available.
pub fn build_multiplication_matrices_with(
    sys: &DiagQuadSystem,
    tol: &StetterTolerances,
) -> Result<MultiplicationMatrices> {
    let n = sys.n_vars();
    let dim = sys.dim();
    let mut matrices: Vec<CMat> = (0..n).map(|_| linalg::zeros(dim, dim)).collect();
    let mut masks: Vec<usize> = (0..dim).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    let m = sys.m();
    let mu = sys.mu();
    let mut col = vec![ZERO; dim];
    for &beta in &masks {
        for i in 0..n {
            let bit = 1 << i;
            if beta & bit == 0 {
                matrices[i][(beta | bit, beta)] = ONE;
                continue;
            }
            let rest = beta ^ bit;
            col.iter_mut().for_each(|c| *c = ZERO);
            col[rest] += mu[i];
            for (l, &mil) in m[i].iter().enumerate() {
                if mil == ZERO {
                    continue;
                }
                let src = &matrices[l];
                for (r, c) in col.iter_mut().enumerate() {
                    let v = src[(r, rest)];
                    if v != ZERO {
                        *c += mil * v;
                    }
                }
            }
            for (r, &c) in col.iter().enumerate() {
                matrices[i][(r, beta)] = c;
            }
        }
    }

    let mut mm = MultiplicationMatrices { n_vars: n, matrices, commutation_defect: 0.0, annihilation_defect: 0.0 };
    mm.commutation_defect = commutation_defect(&mm);
    mm.annihilation_defect = annihilation_defect(&mm, sys);
    if !(mm.commutation_defect <= tol.commutation) {
        return Err(Error::CommutationDefect { defect: mm.commutation_defect, tol: tol.commutation });
    }
    if !(mm.annihilation_defect <= tol.annihilation) {
        return Err(Error::AnnihilationDefect { defect: mm.annihilation_defect, tol: tol.annihilation });
    }
    Ok(mm)
}

fn probe_vectors(dim: usize) -> CMat {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    CMat::from_fn(dim, PROBE_VECTORS, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

/// `max_{i<j} ||A_i A_j − A_j A_i||_F / (||A_i||_F ||A_j||_F)`; estimated on probe
/// vectors for large dimensions.
pub fn commutation_defect(mm: &MultiplicationMatrices) -> f64 {
    let n = mm.n_vars;
    let dim = mm.dim();
    let norms: Vec<f64> = mm.matrices.iter().map(linalg::frobenius).collect();
    let mut worst = 0.0f64;
    if dim <= FULL_CHECK_MAX_DIM {
        for i in 0..n {
            for j in i + 1..n {
                let (a, b) = (&mm.matrices[i], &mm.matrices[j]);
                let d = &(a * b) - &(b * a);
                let scale = norms[i] * norms[j];
                if scale > 0.0 {
                    worst = worst.max(linalg::frobenius(&d) / scale);
                }
            }
        }
    } else {
        let probes = probe_vectors(dim);
        let pnorm = linalg::frobenius(&probes);
        let images: Vec<CMat> = mm.matrices.iter().map(|a| a * &probes).collect();
        for i in 0..n {
            for j in i + 1..n {
                let d = &(&mm.matrices[i] * &images[j]) - &(&mm.matrices[j] * &images[i]);
                let scale = norms[i] * norms[j] * pnorm / (dim as f64).sqrt();
                if scale > 0.0 {
                    worst = worst.max(linalg::frobenius(&d) / scale);
                }
            }
        }
    }
    worst
}

/// `max_i ||A_i^2 − Σ_k m_ik A_k − μ_i I||_F` relative to the size of its terms.
pub fn annihilation_defect(mm: &MultiplicationMatrices, sys: &DiagQuadSystem) -> f64 {
    let n = mm.n_vars;
    let dim = mm.dim();
    let norms: Vec<f64> = mm.matrices.iter().map(linalg::frobenius).collect();
    let full = dim <= FULL_CHECK_MAX_DIM;
    let probes = if full { linalg::identity(dim) } else { probe_vectors(dim) };
    let pscale = if full { 1.0 } else { linalg::frobenius(&probes) / (dim as f64).sqrt() };
    let images: Vec<CMat> = mm.matrices.iter().map(|a| a * &probes).collect();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut d = &mm.matrices[i] * &images[i];
        let mut scale = norms[i] * norms[i];
        for k in 0..n {
            let mik = sys.m()[i][k];
            if mik != ZERO {
                d -= &images[k] * faer::Scale(mik);
                scale += mik.norm() * norms[k];
            }
        }
        let mui = sys.mu()[i];
        if mui != ZERO {
            d -= &probes * faer::Scale(mui);
            scale += mui.norm() * (dim as f64).sqrt();
        }
        if scale > 0.0 {
            worst = worst.max(linalg::frobenius(&d) / (scale * pscale));
        }
    }
    worst
}

/// One common eigen-solution `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub xi: Vec<Complex64>,
    /// `||A_{X_i} v − ξ_i v|| / (||v|| ||A_{X_i}||_F)` per variable.
    pub eigvec_residuals: Vec<f64>,
    /// Number of eigenvectors that collapsed onto this solution.
    pub multiplicity_hint: usize,
    /// Largest disagreement between the Rayleigh quotient and the component ratio
    /// at the largest entry of `v`, relative to `1 + |ξ_i|`.
    pub ratio_mismatch: f64,
}

#[derive(Debug, Clone)]
pub struct EigenSolutionSet {
    pub solutions: Vec<EigenSolution>,
    /// Seed of the attempt that produced the solutions.
    pub seed: u64,
    pub attempts: usize,
    pub worst_residual: f64,
}

/// Eigenvector records that failed the per-matrix residual check.
#[derive(Debug, Clone)]
struct Extraction {
    accepted: Vec<EigenSolution>,
    rejected: Vec<(Vec<Complex64>, f64)>,
    worst: f64,
}

pub fn common_eigen_solutions(
    mm: &MultiplicationMatrices,
    seed: u64,
    tol: &StetterTolerances,
) -> Result<EigenSolutionSet> {
    common_eigen_solutions_with(mm, seed, tol, EigenMethod::RandomCombination)
}

pub fn common_eigen_solutions_with(
    mm: &MultiplicationMatrices,
    seed: u64,
    tol: &StetterTolerances,
    method: EigenMethod,
) -> Result<EigenSolutionSet> {
    let seeds = [seed, seed.wrapping_add(0x9e37_79b9_7f4a_7c15)];
    let mut last = None;
    for (attempt, &s) in seeds.iter().enumerate() {
        let ex = match method {
            EigenMethod::RandomCombination => extract_random_combination(mm, s, tol)?,
            EigenMethod::PerMatrix => extract_per_matrix(mm, tol)?,
        };
        for (xi, r) in &ex.rejected {
            debug!("attempt {attempt}: rejected eigenvector with residual {r:e}, xi = {xi:?}");
        }
        if ex.rejected.is_empty() {
            let solutions = deduplicate(ex.accepted, tol.cluster);
            return Ok(EigenSolutionSet { solutions, seed: s, attempts: attempt + 1, worst_residual: ex.worst });
        }
        warn!(
            "{} of {} eigenvectors failed the residual check (seed {s})",
            ex.rejected.len(),
            ex.rejected.len() + ex.accepted.len()
        );
        last = Some(ex);
        if method == EigenMethod::PerMatrix {
            break;
        }
    }
    let ex = last.expect("at least one attempt");
    let failed = ex.rejected.len();
    Err(Error::DefectiveEigenstructure {
        failed,
        total: failed + ex.accepted.len(),
        worst: ex.rejected.iter().map(|r| r.1).fold(0.0, f64::max),
        tol: tol.residual,
    })
}

/// Reads `ξ` off an eigenvector `v` by Rayleigh quotients, given the images `A_i v`.
fn read_solution(v: &[Complex64], images: &[Vec<Complex64>], norms: &[f64]) -> (Vec<Complex64>, Vec<f64>, f64) {
    let vv: f64 = v.iter().map(|z| z.norm_sqr()).sum();
    let vnorm = vv.sqrt();
    let pivot = (0..v.len()).max_by(|&a, &b| v[a].norm().partial_cmp(&v[b].norm()).unwrap()).unwrap_or(0);
    let mut xi = Vec::with_capacity(images.len());
    let mut residuals = Vec::with_capacity(images.len());
    let mut mismatch = 0.0f64;
    for (w, &norm) in images.iter().zip(norms) {
        let rq: Complex64 = v.iter().zip(w).map(|(a, b)| a.conj() * b).sum::<Complex64>() / vv;
        let r = v.iter().zip(w).map(|(a, b)| (b - rq * a).norm_sqr()).sum::<f64>().sqrt();
        residuals.push(if norm > 0.0 { r / (vnorm * norm) } else { r / vnorm });
        if v[pivot] != ZERO {
            let ratio = w[pivot] / v[pivot];
            mismatch = mismatch.max((ratio - rq).norm() / (1.0 + rq.norm()));
        }
        xi.push(rq);
    }
    (xi, residuals, mismatch)
}

fn classify(vectors: &CMat, mm: &MultiplicationMatrices, tol: &StetterTolerances) -> Extraction {
    let norms: Vec<f64> = mm.matrices.iter().map(linalg::frobenius).collect();
    let images: Vec<CMat> = mm.matrices.iter().map(|a| a * vectors).collect();
    let mut ex = Extraction { accepted: Vec::new(), rejected: Vec::new(), worst: 0.0 };
    for k in 0..vectors.ncols() {
        let v = linalg::column_to_vec(vectors, k);
        let w: Vec<Vec<Complex64>> = images.iter().map(|img| linalg::column_to_vec(img, k)).collect();
        let (xi, residuals, ratio_mismatch) = read_solution(&v, &w, &norms);
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= tol.residual {
            ex.worst = ex.worst.max(worst);
            ex.accepted.push(EigenSolution { xi, eigvec_residuals: residuals, multiplicity_hint: 1, ratio_mismatch });
        } else {
            ex.rejected.push((xi, worst));
        }
    }
    ex
}

/// Seeded real coefficients, scaled so each `A_{X_i}` contributes comparably.
pub fn combination_coefficients(mm: &MultiplicationMatrices, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    mm.matrices
        .iter()
        .map(|a| {
            let c: f64 = rng.gen_range(0.5..1.5);
            let s = if rng.gen_bool(0.5) { c } else { -c };
            let norm = linalg::frobenius(a);
            if norm > 0.0 {
                s / norm
            } else {
                s
            }
        })
        .collect()
}

fn extract_random_combination(mm: &MultiplicationMatrices, seed: u64, tol: &StetterTolerances) -> Result<Extraction> {
    let coeffs = combination_coefficients(mm, seed);
    let mut t = linalg::zeros(mm.dim(), mm.dim());
    for (a, &c) in mm.matrices.iter().zip(&coeffs) {
        t += a * faer::Scale(Complex64::new(c, 0.0));
    }
    let (_, vectors) = linalg::eig(&t)?;
    Ok(classify(&vectors, mm, tol))
}

fn extract_per_matrix(mm: &MultiplicationMatrices, tol: &StetterTolerances) -> Result<Extraction> {
    let decomps = mm.matrices.iter().map(linalg::eig).collect::<Result<Vec<_>>>()?;
    let dim = mm.dim();
    let (_, reference) = &decomps[0];
    let mut xi_sets: Vec<Vec<Complex64>> = vec![Vec::with_capacity(mm.n_vars); dim];
    for (vals, vecs) in &decomps {
        for (k, xi) in xi_sets.iter_mut().enumerate() {
            let u = linalg::column_to_vec(reference, k);
            let best = (0..dim)
                .max_by(|&a, &b| {
                    let ca = cos_angle(&u, &linalg::column_to_vec(vecs, a));
                    let cb = cos_angle(&u, &linalg::column_to_vec(vecs, b));
                    ca.partial_cmp(&cb).unwrap()
                })
                .unwrap();
            xi.push(vals[best]);
        }
    }
    let norms: Vec<f64> = mm.matrices.iter().map(linalg::frobenius).collect();
    let mut ex = Extraction { accepted: Vec::new(), rejected: Vec::new(), worst: 0.0 };
    for (k, xi) in xi_sets.into_iter().enumerate() {
        let v = linalg::column_to_vec(reference, k);
        let vn = linalg::vec_norm(&v);
        let residuals: Vec<f64> = mm
            .matrices
            .iter()
            .zip(&xi)
            .zip(&norms)
            .map(|((a, x), &norm)| {
                let w = linalg::matvec(a, &v);
                let r = w.iter().zip(&v).map(|(wi, vi)| (wi - x * vi).norm_sqr()).sum::<f64>().sqrt();
                r / (vn * norm.max(f64::MIN_POSITIVE))
            })
            .collect();
        let worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= tol.residual {
            ex.worst = ex.worst.max(worst);
            ex.accepted.push(EigenSolution {
                xi,
                eigvec_residuals: residuals,
                multiplicity_hint: 1,
                ratio_mismatch: 0.0,
            });
        } else {
            ex.rejected.push((xi, worst));
        }
    }
    Ok(ex)
}

fn cos_angle(u: &[Complex64], v: &[Complex64]) -> f64 {
    let dot: Complex64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    dot.norm() / (linalg::vec_norm(u) * linalg::vec_norm(v))
}

fn deduplicate(solutions: Vec<EigenSolution>, cluster: f64) -> Vec<EigenSolution> {
    let scale = 1.0 + solutions.iter().map(|s| linalg::vec_norm_inf(&s.xi)).fold(0.0, f64::max);
    let mut out: Vec<EigenSolution> = Vec::new();
    for s in solutions {
        let dup = out
            .iter_mut()
            .find(|o| o.xi.iter().zip(&s.xi).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max) <= cluster * scale);
        match dup {
            Some(o) => o.multiplicity_hint += 1,
            None => out.push(s),
        }
    }
    out
}

/// `f(A_{X_1}, …, A_{X_N})`, with matrix powers cached across terms.
pub fn evaluate_poly_at_matrices(f: &SparsePoly, mm: &MultiplicationMatrices) -> CMat {
    let dim = mm.dim();
    let mut powers: HashMap<(usize, u32), CMat> = HashMap::new();
    let mut out = linalg::zeros(dim, dim);
    for (exps, &c) in f.terms() {
        let mut term = linalg::identity(dim) * faer::Scale(c);
        for (i, &k) in exps.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let p = power(mm, i, k, &mut powers);
            term = &term * &p;
        }
        out += &term;
    }
    out
}

fn power(mm: &MultiplicationMatrices, i: usize, k: u32, cache: &mut HashMap<(usize, u32), CMat>) -> CMat {
    if let Some(p) = cache.get(&(i, k)) {
        return p.clone();
    }
    let p = if k == 1 { mm.matrices[i].clone() } else { &power(mm, i, k - 1, cache) * &mm.matrices[i] };
    cache.insert((i, k), p.clone());
    p
}

/// `A_F = Σ_i w_i A_{X_i}^3`; its eigenvalues are the values `Σ_i w_i ξ_i^3` over all solutions.
pub fn build_critical_value_matrix(mm: &MultiplicationMatrices, weights: &[Complex64]) -> Result<CMat> {
    if weights.len() != mm.n_vars {
        return Err(Error::Dimension(format!("{} weights for {} variables", weights.len(), mm.n_vars)));
    }
    let dim = mm.dim();
    let mut out = linalg::zeros(dim, dim);
    for (a, &w) in mm.matrices.iter().zip(weights) {
        if w == ZERO {
            continue;
        }
        let a2 = a * a;
        out += &(&a2 * a) * faer::Scale(w);
    }
    Ok(out)
}
