use num_complex::Complex64;
use thiserror::Error;

use crate::reduce::ReductionReport;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or unparseable input.
    Input,
    /// The system violates a standing assumption (stability, distinct poles, coprimality).
    Validation,
    /// Eigen extraction, conditioning or residual checks failed.
    Numerical,
    /// The pipeline ran but no real Hurwitz critical point survived.
    NoAdmissible,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("no roots defined for a constant or zero polynomial")]
    NoRoots,

    #[error("Hurwitz test requires real polynomial (max |imag| = {max_imag:e})")]
    NonRealPolynomial { max_imag: f64 },

    #[error("ill-conditioned Vandermonde / nodes too close: nodes {i} and {j} are {distance:e} apart")]
    NodesTooClose { i: usize, j: usize, distance: f64 },

    #[error("ill-conditioned {what}: condition estimate {cond:e} exceeds {limit:e}")]
    IllConditioned { what: &'static str, cond: f64, limit: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("not strictly proper: numerator degree {num_degree} >= denominator degree {den_degree} (use --strip-feedthrough)")]
    NotStrictlyProper { num_degree: usize, den_degree: usize },

    #[error("unstable pole at {pole}")]
    UnstablePole { pole: Complex64 },

    #[error("repeated pole: poles {i} and {j} ({pi} and {pj}) are not separated; systems with repeated poles are not supported")]
    RepeatedPole { i: usize, j: usize, pi: Complex64, pj: Complex64 },

    #[error("pole-zero cancellation at pole {pole}: |e(pole)| = {value:e}")]
    PoleZeroCancellation { pole: Complex64, value: f64 },

    #[error("pole set is not closed under complex conjugation (pole {pole} has no partner)")]
    NonConjugatePoles { pole: Complex64 },

    #[error("invalid system: {0}")]
    InvalidSystem(String),

    #[error("unstable approximant: pole {pole}")]
    UnstableApproximant { pole: Complex64 },

    #[error("degenerate leading coefficient: |q0| = {q0:e}, ||a~|| = {norm:e}")]
    DegenerateLeadingCoefficient { q0: f64, norm: f64 },

    #[error("reduction budget exceeded: {terms} intermediate terms (budget {budget})")]
    ReductionBudgetExceeded { terms: usize, budget: usize },

    #[error("basis too large: {n} variables exceeds the cap of {cap}")]
    BasisTooLarge { n: usize, cap: usize },

    #[error("commutation defect {defect:e} exceeds tolerance {tol:e}")]
    CommutationDefect { defect: f64, tol: f64 },

    #[error("generator annihilation defect {defect:e} exceeds tolerance {tol:e}")]
    AnnihilationDefect { defect: f64, tol: f64 },

    #[error("defective eigenstructure suspected: {failed} of {total} eigenvectors failed the per-matrix residual check (worst {worst:e}, tolerance {tol:e})")]
    DefectiveEigenstructure { failed: usize, total: usize, worst: f64, tol: f64 },

    #[error("critical value matrix path inconsistent: {0}")]
    CriticalValueMismatch(String),

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("degenerate relaxation system (first order): alpha = {alpha}")]
    DegenerateRelaxation { alpha: f64 },

    #[error("no admissible critical point found ({} candidates, all rejected)", report.candidates.len())]
    NoAdmissible { report: Box<ReductionReport> },

    #[error("{0}")]
    Input(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            Input(_) | Dimension(_) => ErrorKind::Input,
            NotStrictlyProper { .. }
            | UnstablePole { .. }
            | RepeatedPole { .. }
            | PoleZeroCancellation { .. }
            | NonConjugatePoles { .. }
            | InvalidSystem(_)
            | DegenerateRelaxation { .. }
            | BasisTooLarge { .. } => ErrorKind::Validation,
            NoAdmissible { .. } => ErrorKind::NoAdmissible,
            NoRoots
            | NonRealPolynomial { .. }
            | NodesTooClose { .. }
            | IllConditioned { .. }
            | UnstableApproximant { .. }
            | DegenerateLeadingCoefficient { .. }
            | ReductionBudgetExceeded { .. }
            | CommutationDefect { .. }
            | AnnihilationDefect { .. }
            | DefectiveEigenstructure { .. }
            | CriticalValueMismatch(_)
            | Eigen(_) => ErrorKind::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
