//! Independent oracles shared by the integration tests. Nothing here calls the
//! library's numerical kernels; each oracle recomputes its quantity by a
//! different route (quadrature, elimination, state-space Gramians, search).

#![allow(dead_code)]

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type C = Complex64;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Adaptive quadrature of the H2 integral.
// ---------------------------------------------------------------------------

#[allow(clippy::too_many_arguments)]
fn simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    m: f64,
    fm: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || b - a < 1e-9 {
        return left + right + delta / 15.0;
    }
    simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]` with absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // Start from a fixed subdivision so narrow resonance peaks are not missed.
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let (x0, x1) = (a + k as f64 * h, a + (k + 1) as f64 * h);
            let xm = 0.5 * (x0 + x1);
            let (f0, f1, fm) = (f(x0), f(x1), f(xm));
            let whole = (x1 - x0) / 6.0 * (f0 + 4.0 * fm + f1);
            simpson(f, x0, f0, x1, f1, xm, fm, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// `(1/2π) ∫ |H(iω)|^2 dω` over the whole axis, with `ω = tan θ` mapping the
/// line onto `(−π/2, π/2)`; for strictly proper `H` the mapped integrand is bounded.
pub fn quadrature_h2_sq(h: &dyn Fn(C) -> C, tol: f64) -> f64 {
    let half = std::f64::consts::FRAC_PI_2;
    let g = |theta: f64| {
        if theta.abs() >= half {
            // Limit of |H(i tan θ)|^2 sec^2 θ at the endpoints.
            let w = 1e8;
            return h(c(0.0, w)).norm_sqr() * w * w;
        }
        let w = theta.tan();
        let sec = 1.0 / theta.cos();
        h(c(0.0, w)).norm_sqr() * sec * sec
    };
    adaptive_simpson(&g, -half, half, tol) / (2.0 * std::f64::consts::PI)
}

// ---------------------------------------------------------------------------
// Dense polynomials (ascending coefficients) and Aberth root finding.
// ---------------------------------------------------------------------------

pub fn peval(p: &[C], x: C) -> C {
    p.iter().rev().fold(c(0.0, 0.0), |acc, &k| acc * x + k)
}

pub fn pmul(a: &[C], b: &[C]) -> Vec<C> {
    let mut out = vec![c(0.0, 0.0); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn padd(a: &[C], b: &[C]) -> Vec<C> {
    let n = a.len().max(b.len());
    (0..n).map(|k| a.get(k).copied().unwrap_or_default() + b.get(k).copied().unwrap_or_default()).collect()
}

pub fn pscale(a: &[C], s: C) -> Vec<C> {
    a.iter().map(|&x| x * s).collect()
}

fn pderiv(p: &[C]) -> Vec<C> {
    if p.len() <= 1 {
        return vec![c(0.0, 0.0)];
    }
    p.iter().enumerate().skip(1).map(|(k, &x)| x * k as f64).collect()
}

/// All roots of an ascending-coefficient polynomial by simultaneous
/// Aberth–Ehrlich iteration.
pub fn aberth_roots(p: &[C]) -> Vec<C> {
    let mut p = p.to_vec();
    while p.len() > 1 && p.last().unwrap().norm() == 0.0 {
        p.pop();
    }
    let n = p.len() - 1;
    if n == 0 {
        return Vec::new();
    }
    let lead = p[n];
    let monic: Vec<C> = p.iter().map(|&x| x / lead).collect();
    let dp = pderiv(&monic);
    // Cauchy bound for the initial circle.
    let radius = 1.0 + monic[..n].iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut z: Vec<C> = (0..n)
        .map(|k| C::from_polar(0.5 * radius, 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let f = peval(&monic, z[i]);
            let df = peval(&dp, z[i]);
            if f.norm() == 0.0 {
                continue;
            }
            let ratio = f / df;
            let sum: C = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * sum);
            z[i] -= w;
            moved = moved.max(w.norm() / (1.0 + z[i].norm()));
        }
        if moved < 1e-15 {
            break;
        }
    }
    // Final Newton polish.
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let df = peval(&dp, *zi);
            if df.norm() > 0.0 {
                *zi -= peval(&monic, *zi) / df;
            }
        }
    }
    z
}

// ---------------------------------------------------------------------------
// The quadratic system of the first-order conditions, built independently.
// ---------------------------------------------------------------------------

/// `M_ij = e(δ_i) · L_j(δ_i)`, with `L_j` the Lagrange basis on the nodes `−δ`;
/// `e(δ_i) = r_i · Π_{k≠i}(δ_i − δ_k)` for a system given by poles and residues.
pub fn lagrange_m(poles: &[C], residues: &[C]) -> Vec<Vec<C>> {
    let n = poles.len();
    let e_at = |i: usize| residues[i] * (0..n).filter(|&k| k != i).map(|k| poles[i] - poles[k]).product::<C>();
    (0..n)
        .map(|i| {
            let ei = e_at(i);
            (0..n)
                .map(|j| {
                    let l: C =
                        (0..n).filter(|&k| k != j).map(|k| (poles[i] + poles[k]) / (-poles[j] + poles[k])).product();
                    ei * l
                })
                .collect()
        })
        .collect()
}

fn quad_residual(m: &[Vec<C>], x: &[C]) -> Vec<C> {
    (0..x.len()).map(|i| x[i] * x[i] - (0..x.len()).map(|j| m[i][j] * x[j]).sum::<C>()).collect()
}

/// Newton polish of `x∘x = M x` with an explicit Gaussian elimination.
pub fn polish(m: &[Vec<C>], x: &[C]) -> Vec<C> {
    let n = x.len();
    let mut x = x.to_vec();
    for _ in 0..8 {
        let f = quad_residual(m, &x);
        let mut a: Vec<Vec<C>> = (0..n)
            .map(|i| {
                let mut row: Vec<C> = (0..n).map(|j| -m[i][j]).collect();
                row[i] += x[i] * 2.0;
                row.push(f[i]);
                row
            })
            .collect();
        let Some(step) = gauss(&mut a) else { break };
        let old = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let trial: Vec<C> = (0..n).map(|i| x[i] - step[i]).collect();
        let new = quad_residual(m, &trial).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if new < old {
            x = trial;
        } else {
            break;
        }
    }
    x
}

fn gauss(a: &mut [Vec<C>]) -> Option<Vec<C>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().partial_cmp(&a[j][col].norm()).unwrap())?;
        if a[piv][col].norm() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for row in rest.iter_mut() {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
        }
    }
    let mut x = vec![c(0.0, 0.0); n];
    for r in (0..n).rev() {
        let s: C = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    Some(x)
}

/// All `2^N` solutions (zero included) of `x∘x = M x` for `N = 2` or `3` by
/// elimination to a univariate polynomial in `x_1`.
pub fn elimination_solutions(m: &[Vec<C>]) -> Vec<Vec<C>> {
    let n = m.len();
    let raw: Vec<Vec<C>> = match n {
        2 => {
            // x2 = (x1^2 − m11 x1)/m12;  (x1^2 − m11 x1)^2 = m12^2 m21 x1 + m12 m22 (x1^2 − m11 x1).
            let (m11, m12, m21, m22) = (m[0][0], m[0][1], m[1][0], m[1][1]);
            let q = vec![c(0.0, 0.0), -m11, c(1.0, 0.0)];
            let lhs = pmul(&q, &q);
            let rhs = padd(&pscale(&[c(0.0, 0.0), c(1.0, 0.0)], m12 * m12 * m21), &pscale(&q, m12 * m22));
            let p = padd(&lhs, &pscale(&rhs, c(-1.0, 0.0)));
            aberth_roots(&p).into_iter().map(|x1| vec![x1, (x1 * x1 - m11 * x1) / m12]).collect()
        }
        3 => {
            // x3 = (q − m12 y)/m13 with q = x1^2 − m11 x1 and y = x2. The remaining
            // two equations are quadratics in y whose coefficients are polynomials in x1.
            let one = c(1.0, 0.0);
            let zero = c(0.0, 0.0);
            let (m11, m12, m13) = (m[0][0], m[0][1], m[0][2]);
            let (m21, m22, m23) = (m[1][0], m[1][1], m[1][2]);
            let (m31, m32, m33) = (m[2][0], m[2][1], m[2][2]);
            let q = vec![zero, -m11, one];
            let x1 = vec![zero, one];
            // y^2 − m21 x1 − m22 y − m23 (q − m12 y)/m13
            let a2 = vec![one];
            let a1 = vec![-m22 + m23 * m12 / m13];
            let a0 = padd(&pscale(&x1, -m21), &pscale(&q, -m23 / m13));
            // ((q − m12 y)/m13)^2 − m31 x1 − m32 y − m33 (q − m12 y)/m13
            let b2 = vec![m12 * m12 / (m13 * m13)];
            let b1 = padd(&pscale(&q, -2.0 * m12 / (m13 * m13)), &[-m32 + m33 * m12 / m13]);
            let b0 =
                padd(&padd(&pscale(&pmul(&q, &q), one / (m13 * m13)), &pscale(&x1, -m31)), &pscale(&q, -m33 / m13));
            let sub = |p: &[C], r: &[C]| padd(p, &pscale(r, c(-1.0, 0.0)));
            let u = sub(&pmul(&a2, &b0), &pmul(&a0, &b2));
            let v = sub(&pmul(&a2, &b1), &pmul(&a1, &b2));
            let w = sub(&pmul(&a1, &b0), &pmul(&a0, &b1));
            let res = sub(&pmul(&u, &u), &pmul(&v, &w));
            aberth_roots(&res)
                .into_iter()
                .map(|r| {
                    let y = -peval(&u, r) / peval(&v, r);
                    let x3 = (peval(&q, r) - m12 * y) / m13;
                    vec![r, y, x3]
                })
                .collect()
        }
        _ => panic!("elimination oracle only covers N = 2 and N = 3"),
    };
    raw.into_iter().map(|x| polish(m, &x)).collect()
}

// ---------------------------------------------------------------------------
// State-space H2 inner products and a multi-start search over approximants.
// ---------------------------------------------------------------------------

/// Real state-space triple `(A, B, C)` of a SISO system.
#[derive(Clone, Debug)]
pub struct StateSpace {
    pub a: Mat<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl StateSpace {
    /// Diagonal realisation of `Σ r_i/(s − p_i)` with real poles.
    pub fn from_real_poles(poles: &[f64], residues: &[f64]) -> Self {
        let n = poles.len();
        StateSpace {
            a: Mat::from_fn(n, n, |i, j| if i == j { poles[i] } else { 0.0 }),
            b: vec![1.0; n],
            c: residues.to_vec(),
        }
    }

    /// Controllable canonical form of `b(s)/a(s)` with monic `a` (ascending coefficients).
    pub fn companion(a: &[f64]) -> Self {
        let m = a.len();
        StateSpace {
            a: Mat::from_fn(m, m, |i, j| {
                if i + 1 < m {
                    if j == i + 1 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    -a[j]
                }
            }),
            b: (0..m).map(|k| if k + 1 == m { 1.0 } else { 0.0 }).collect(),
            c: vec![0.0; m],
        }
    }
}

/// `X` with `A1 X + X A2ᵀ + B1 B2ᵀ = 0`, by the Kronecker form.
fn sylvester(a1: &Mat<f64>, b1: &[f64], a2: &Mat<f64>, b2: &[f64]) -> Mat<f64> {
    let (n1, n2) = (a1.nrows(), a2.nrows());
    let dim = n1 * n2;
    // vec(X) column-major: index i + n1 * j.
    let k = Mat::from_fn(dim, dim, |r, s| {
        let (i, j) = (r % n1, r / n1);
        let (p, q) = (s % n1, s / n1);
        let mut v = 0.0;
        if q == j {
            v += a1[(i, p)];
        }
        if p == i {
            v += a2[(j, q)];
        }
        v
    });
    let rhs = Mat::from_fn(dim, 1, |r, _| -(b1[r % n1] * b2[r / n1]));
    let x = k.partial_piv_lu().solve(&rhs);
    Mat::from_fn(n1, n2, |i, j| x[(i + n1 * j, 0)])
}

/// `⟨G1, G2⟩_{H2} = C1 X C2ᵀ`.
pub fn inner(g1: &StateSpace, g2: &StateSpace) -> f64 {
    let x = sylvester(&g1.a, &g1.b, &g2.a, &g2.b);
    let mut s = 0.0;
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            s += g1.c[i] * x[(i, j)] * g2.c[j];
        }
    }
    s
}

/// Smallest squared error over numerators for a fixed stable monic denominator
/// (ascending `a`), with the optimal numerator (ascending).
pub fn best_numerator(g: &StateSpace, a: &[f64]) -> (f64, Vec<f64>) {
    best_numerator_with(g, inner(g, g), a)
}

/// As [`best_numerator`], with `||G||^2` supplied by the caller.
fn best_numerator_with(g: &StateSpace, gg: f64, a: &[f64]) -> (f64, Vec<f64>) {
    let h = StateSpace::companion(a);
    let m = a.len();
    let xg = sylvester(&g.a, &g.b, &h.a, &h.b);
    let p = sylvester(&h.a, &h.b, &h.a, &h.b);
    let gvec: Vec<f64> = (0..m).map(|j| (0..g.c.len()).map(|i| g.c[i] * xg[(i, j)]).sum()).collect();
    let rhs = Mat::from_fn(m, 1, |i, _| gvec[i]);
    let b = p.partial_piv_lu().solve(&rhs);
    let b: Vec<f64> = (0..m).map(|i| b[(i, 0)]).collect();
    let gain: f64 = b.iter().zip(&gvec).map(|(x, y)| x * y).sum();
    (gg - gain, b)
}

/// Nelder–Mead minimisation from `x0` with initial step `step`.
pub fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], step: f64, iters: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for k in 0..n {
        let mut v = x0.to_vec();
        v[k] += step;
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    for _ in 0..iters {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap_or(std::cmp::Ordering::Equal));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();
        let spread = (vals[n] - vals[0]).abs();
        let size = simplex
            .iter()
            .skip(1)
            .map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if size < 1e-9 || (spread <= 1e-15 * (1.0 + vals[0].abs()) && size < 1e-6) {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n][k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < vals[n].min(fr) {
                simplex[n] = xc;
                vals[n] = fc;
            } else {
                for k in 1..=n {
                    simplex[k] = (0..n).map(|d| simplex[0][d] + 0.5 * (simplex[k][d] - simplex[0][d])).collect();
                    vals[k] = f(&simplex[k]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&i, &j| vals[i].partial_cmp(&vals[j]).unwrap()).unwrap();
    (simplex[best].clone(), vals[best])
}

/// Global minimum of the squared H2 error over stable real approximants of
/// order 1 or 2, by a multi-start Nelder–Mead search over the denominator.
///
/// Order 1: `a = s + e^{u}`; order 2: `a = s^2 + e^{u} s + e^{v}` (Hurwitz
/// exactly when both coefficients are positive). The numerator is eliminated
/// in closed form for every denominator.
pub fn multistart_min(g: &StateSpace, order: usize) -> (f64, Vec<f64>) {
    let gg = inner(g, g);
    let objective = |u: &[f64]| -> f64 {
        if u.iter().any(|x| x.abs() > 30.0) {
            return f64::INFINITY;
        }
        let a: Vec<f64> = match order {
            1 => vec![u[0].exp()],
            2 => vec![u[1].exp(), u[0].exp()],
            _ => unreachable!(),
        };
        let v = best_numerator_with(g, gg, &a).0;
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    let grid: Vec<f64> = (0..13).map(|k| -6.0 + k as f64).collect();
    let starts: Vec<Vec<f64>> = match order {
        1 => grid.iter().map(|&x| vec![x]).collect(),
        2 => grid.iter().flat_map(|&x| grid.iter().map(move |&y| vec![x, y])).collect(),
        _ => panic!("order {order} not covered"),
    };
    let mut best = (f64::INFINITY, Vec::new());
    for s in starts {
        let (x, v) = nelder_mead(&objective, &s, 0.5, 4000);
        // Restart once from the minimiser to leave any collapsed simplex.
        let (x, v2) = nelder_mead(&objective, &x, 0.05, 4000);
        let v = v.min(v2);
        if v < best.0 {
            best = (v, x);
        }
    }
    best
}

// ---------------------------------------------------------------------------
// Random test systems.
// ---------------------------------------------------------------------------

/// Real poles in `[−3, −0.5]` with pairwise separation at least `0.3`, sorted.
pub fn separated_poles(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let mut p: Vec<f64> = (0..n).map(|_| r.gen_range(-3.0..-0.5)).collect();
        p.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if p.windows(2).all(|w| w[1] - w[0] >= 0.3) {
            return p;
        }
    }
}

/// Residues of either sign with magnitude in `[0.2, 2]`.
pub fn residues(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let m = r.gen_range(0.2..2.0);
            if r.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect()
}

/// A stable strictly proper system of degree `n ≤ 6` with mixed real and
/// complex-pair poles, returned as descending real coefficients.
pub fn random_stable_coefficients(r: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut roots: Vec<C> = Vec::new();
    while roots.len() < n {
        if n - roots.len() >= 2 && r.gen_bool(0.5) {
            let re = r.gen_range(-3.0..-0.2);
            let im = r.gen_range(0.3..3.0);
            roots.push(c(re, im));
            roots.push(c(re, -im));
        } else {
            roots.push(c(r.gen_range(-4.0..-0.2), 0.0));
        }
    }
    let mut den = vec![c(1.0, 0.0)];
    for &z in &roots {
        den = pmul(&den, &[-z, c(1.0, 0.0)]);
    }
    let num_deg = r.gen_range(0..n);
    let mut num: Vec<f64> = (0..=num_deg).map(|_| r.gen_range(-2.0..2.0)).collect();
    if num.last().is_none_or(|x| x.abs() < 0.1) {
        *num.last_mut().unwrap() = 1.0;
    }
    let desc = |v: Vec<f64>| -> Vec<f64> { v.into_iter().rev().collect() };
    (desc(num), desc(den.iter().map(|z| z.re).collect()))
}
