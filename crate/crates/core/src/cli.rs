//! Command-line front end: job description, system input parsing, the
//! relaxation benchmark generator and report rendering.
//!
//! System files are TOML documents holding either `numerator` and
//! `denominator` (descending coefficient lists) or `poles` and `residues`,
//! where each complex entry is a number, a `"re,im"` string or a `[re, im]` pair.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, ErrorKind, Result};
use crate::poly::Polynomial;
use crate::reduce::{self, ReductionOptions, ReductionReport, SelectionMethod};
use crate::tf::{self, TransferFunction, ValidatedSystem, ValidationTolerances};

/// Default system order cap of the command-line tool.
pub const DEFAULT_CLI_CAP: usize = 9;
/// The multiplication matrices have `2^N` rows; beyond this they stop fitting in memory.
pub const HARD_CAP: usize = 14;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NO_ADMISSIBLE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Input => EXIT_INPUT,
        ErrorKind::NoAdmissible => EXIT_NO_ADMISSIBLE,
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Enumerate every critical point.
    Enum,
    /// Walk the eigenvalues of the critical value matrix.
    Cvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Text,
    /// TOML document with 17-significant-digit floats.
    Structured,
}

/// Tolerance bundles; explicit `--tol-*` flags override the bundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Profile {
    /// Realness 1e-8, Hurwitz margin 1e-12, eigenvector residual 1e-9.
    Strict,
    /// Realness 1e-6, Hurwitz margin 1e-9, eigenvector residual 1e-7.
    #[default]
    Default,
    /// Realness 1e-4, Hurwitz margin 1e-7, eigenvector residual 1e-5.
    Loose,
}

impl Profile {
    /// `(realness, hurwitz margin, eigenvector residual)`.
    fn tolerances(self) -> (f64, f64, f64) {
        match self {
            Profile::Strict => (1e-8, 1e-12, 1e-9),
            Profile::Default => (1e-6, 1e-9, 1e-7),
            Profile::Loose => (1e-4, 1e-7, 1e-5),
        }
    }
}

/// Globally optimal H2 model reduction of a SISO transfer function by one order.
#[derive(Debug, Parser)]
#[command(name = "h2reduce", version, about)]
pub struct Args {
    /// System file (TOML with numerator/denominator or poles/residues).
    #[arg(long, value_name = "PATH", conflicts_with_all = ["inline", "relaxation"])]
    pub input: Option<PathBuf>,
    /// System description given directly, in the file syntax; `;` separates lines.
    #[arg(long, value_name = "TEXT", conflicts_with = "relaxation")]
    pub inline: Option<String>,
    /// Relaxation benchmark Σ_{j=1..N} α^{2j}/(s+α^{2j}), e.g. `--relaxation N=5 alpha=0.78`.
    #[arg(long, num_args = 1..=2, value_name = "KEY=VALUE")]
    pub relaxation: Option<Vec<String>>,
    /// Seed of the random eigenvector combination.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = MethodArg::Enum)]
    pub method: MethodArg,
    /// Tolerance bundle.
    #[arg(long, value_enum, default_value_t = Profile::Default)]
    pub profile: Profile,
    /// Realness tolerance for recovered denominators and critical values [profile default 1e-6].
    #[arg(long, value_name = "X")]
    pub tol_real: Option<f64>,
    /// Hurwitz margin: approximant poles need Re < -X [profile default 1e-9].
    #[arg(long, value_name = "X")]
    pub tol_hurwitz: Option<f64>,
    /// Relative common-eigenvector residual [profile default 1e-7].
    #[arg(long, value_name = "X")]
    pub tol_eig: Option<f64>,
    /// Split off a direct feedthrough term instead of rejecting proper systems.
    #[arg(long)]
    pub strip_feedthrough: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub output: OutputFormat,
    /// Largest accepted system order (at most 14).
    #[arg(long, default_value_t = DEFAULT_CLI_CAP)]
    pub cap: usize,
}

/// A system description in one of the two accepted forms.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemInput {
    Coefficients { numerator: Vec<f64>, denominator: Vec<f64> },
    PoleResidue { poles: Vec<Complex64>, residues: Vec<Complex64> },
    Relaxation { n: usize, alpha: f64 },
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub input: SystemInput,
    pub options: ReductionOptions,
    pub strip_feedthrough: bool,
    pub output: OutputFormat,
}

impl JobSpec {
    pub fn from_args(args: &Args) -> Result<JobSpec> {
        let input = match (&args.input, &args.inline, &args.relaxation) {
            (Some(path), None, None) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
                parse_system(&text)?
            }
            (None, Some(text), None) => parse_system(&text.replace(';', "\n"))?,
            (None, None, Some(tokens)) => parse_relaxation_args(tokens)?,
            (None, None, None) => {
                return Err(Error::Input("no system given: use --input, --inline or --relaxation".into()))
            }
            _ => return Err(Error::Input("give exactly one of --input, --inline, --relaxation".into())),
        };
        if args.cap > HARD_CAP {
            return Err(Error::Input(format!("--cap: {} exceeds the hard cap of {HARD_CAP}", args.cap)));
        }
        let (real, hurwitz, eig) = args.profile.tolerances();
        let real = args.tol_real.unwrap_or(real);
        let hurwitz = args.tol_hurwitz.unwrap_or(hurwitz);
        let eig = args.tol_eig.unwrap_or(eig);
        for (name, v) in [("--tol-real", real), ("--tol-hurwitz", hurwitz), ("--tol-eig", eig)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Input(format!("{name}: expected a nonnegative number, got {v}")));
            }
        }
        let mut options = ReductionOptions {
            seed: args.seed,
            method: match args.method {
                MethodArg::Enum => SelectionMethod::Enumeration,
                MethodArg::Cvm => SelectionMethod::CriticalValueMatrix,
            },
            cap: args.cap,
            criterion_real: real,
            ..Default::default()
        };
        options.recovery.real = real;
        options.recovery.hurwitz = hurwitz;
        options.stetter.residual = eig;
        Ok(JobSpec { input, options, strip_feedthrough: args.strip_feedthrough, output: args.output })
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ComplexEntry {
    Real(f64),
    Pair([f64; 2]),
    Text(String),
}

impl ComplexEntry {
    fn value(&self, field: &str, k: usize) -> Result<Complex64> {
        match self {
            ComplexEntry::Real(re) => Ok(Complex64::new(*re, 0.0)),
            ComplexEntry::Pair([re, im]) => Ok(Complex64::new(*re, *im)),
            ComplexEntry::Text(s) => {
                let bad = || Error::Input(format!("{field}[{k}]: expected \"re,im\", got {s:?}"));
                let mut parts = s.split(',').map(str::trim);
                let re = parts.next().ok_or_else(bad)?.parse::<f64>().map_err(|_| bad())?;
                let im = match parts.next() {
                    Some(t) => t.parse::<f64>().map_err(|_| bad())?,
                    None => 0.0,
                };
                if parts.next().is_some() {
                    return Err(bad());
                }
                Ok(Complex64::new(re, im))
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemFile {
    numerator: Option<Vec<f64>>,
    denominator: Option<Vec<f64>>,
    poles: Option<Vec<ComplexEntry>>,
    residues: Option<Vec<ComplexEntry>>,
}

/// Parses a system file; exactly one of the two forms must be present.
pub fn parse_system(text: &str) -> Result<SystemInput> {
    let file: SystemFile = toml::from_str(text).map_err(|e| Error::Input(format!("malformed system file: {e}")))?;
    let complex = |field: &str, v: &[ComplexEntry]| -> Result<Vec<Complex64>> {
        v.iter().enumerate().map(|(k, c)| c.value(field, k)).collect()
    };
    match (file.numerator, file.denominator, file.poles, file.residues) {
        (Some(numerator), Some(denominator), None, None) => {
            if denominator.is_empty() {
                return Err(Error::Input("denominator: empty coefficient list".into()));
            }
            if numerator.is_empty() {
                return Err(Error::Input("numerator: empty coefficient list".into()));
            }
            Ok(SystemInput::Coefficients { numerator, denominator })
        }
        (None, None, Some(p), Some(r)) => {
            let poles = complex("poles", &p)?;
            let residues = complex("residues", &r)?;
            if poles.len() != residues.len() {
                return Err(Error::Input(format!("residues: {} entries for {} poles", residues.len(), poles.len())));
            }
            if poles.is_empty() {
                return Err(Error::Input("poles: empty list".into()));
            }
            Ok(SystemInput::PoleResidue { poles, residues })
        }
        (None, None, None, None) => {
            Err(Error::Input("no system: expected numerator/denominator or poles/residues".into()))
        }
        (n, d, p, r) => {
            let missing = [
                ("numerator", n.is_none()),
                ("denominator", d.is_none()),
                ("poles", p.is_none()),
                ("residues", r.is_none()),
            ];
            let coeff = !missing[0].1 || !missing[1].1;
            let pr = !missing[2].1 || !missing[3].1;
            if coeff && pr {
                Err(Error::Input("give either numerator/denominator or poles/residues, not both".into()))
            } else {
                let field = missing
                    .iter()
                    .filter(|(name, absent)| *absent && (coeff == (*name == "numerator" || *name == "denominator")))
                    .map(|(name, _)| *name)
                    .next()
                    .unwrap_or("system");
                Err(Error::Input(format!("{field}: missing")))
            }
        }
    }
}

fn parse_relaxation_args(tokens: &[String]) -> Result<SystemInput> {
    let mut n = None;
    let mut alpha = None;
    for tok in tokens.iter().flat_map(|t| t.split(',')) {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("--relaxation: expected KEY=VALUE, got {tok:?}")))?;
        match k.trim().to_ascii_lowercase().as_str() {
            "n" => {
                n = Some(
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Input(format!("--relaxation N: expected a positive integer, got {v:?}")))?,
                )
            }
            "alpha" => {
                alpha = Some(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Input(format!("--relaxation alpha: expected a number, got {v:?}")))?,
                )
            }
            other => return Err(Error::Input(format!("--relaxation: unknown key {other:?}"))),
        }
    }
    let n = n.ok_or_else(|| Error::Input("--relaxation: N missing".into()))?;
    let alpha = alpha.ok_or_else(|| Error::Input("--relaxation: alpha missing".into()))?;
    if n == 0 {
        return Err(Error::Input("--relaxation N: must be at least 1".into()));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Input(format!("--relaxation alpha: must be positive, got {alpha}")));
    }
    Ok(SystemInput::Relaxation { n, alpha })
}

fn relaxation_poles_residues(n: usize, alpha: f64) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if alpha == 1.0 {
        return Err(Error::DegenerateRelaxation { alpha });
    }
    let terms: Vec<f64> = (1..=n as i32).map(|j| alpha.powi(2 * j)).collect();
    Ok((
        terms.iter().map(|&t| Complex64::new(-t, 0.0)).collect(),
        terms.iter().map(|&t| Complex64::new(t, 0.0)).collect(),
    ))
}

/// `Σ_{j=1}^{n} α^{2j} / (s + α^{2j})` as a single rational function.
pub fn generate_relaxation(n: usize, alpha: f64) -> Result<TransferFunction> {
    if n == 0 {
        return Err(Error::Input("relaxation order must be at least 1".into()));
    }
    let (poles, residues) = relaxation_poles_residues(n, alpha)?;
    let den = Polynomial::from_roots(&poles);
    let mut num = Polynomial::zero();
    for (i, r) in residues.iter().enumerate() {
        let others: Vec<Complex64> = poles.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &p)| p).collect();
        num = &num + &Polynomial::from_roots(&others).scale(*r);
    }
    TransferFunction::from_polynomials(num.real_part(), den.real_part())
}

/// Validates the system described by `input`, returning it with any stripped feedthrough.
///
/// Relaxation systems are validated from their exact poles and residues rather
/// than from the expanded coefficients, whose roots lose accuracy for small `α`.
pub fn build_system(input: &SystemInput, strip_feedthrough: bool) -> Result<(ValidatedSystem, f64)> {
    let tol = ValidationTolerances::default();
    match input {
        SystemInput::Coefficients { numerator, denominator } => {
            let (tf, d) = if strip_feedthrough {
                TransferFunction::strip_feedthrough(numerator, denominator)?
            } else {
                (TransferFunction::new(numerator, denominator)?, 0.0)
            };
            Ok((tf::validate(&tf, &tol)?, d))
        }
        SystemInput::PoleResidue { poles, residues } => Ok((tf::from_pole_residue(poles, residues, &tol)?, 0.0)),
        SystemInput::Relaxation { n, alpha } => {
            if *n == 0 {
                return Err(Error::Input("relaxation order must be at least 1".into()));
            }
            let (poles, residues) = relaxation_poles_residues(*n, *alpha)?;
            Ok((tf::from_pole_residue(&poles, &residues, &tol)?, 0.0))
        }
    }
}

/// Result of one invocation: exit code plus what goes to stdout and stderr.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub report: Option<ReductionReport>,
}

pub fn run(job: &JobSpec) -> Outcome {
    let (sys, feedthrough) = match build_system(&job.input, job.strip_feedthrough) {
        Ok(v) => v,
        Err(e) => return failure(e),
    };
    match reduce::solve_reduction(&sys, &job.options) {
        Ok(report) => Outcome {
            code: EXIT_OK,
            stdout: render(&report, &sys, feedthrough, job.output),
            stderr: String::new(),
            report: Some(report),
        },
        Err(Error::NoAdmissible { report }) => Outcome {
            code: EXIT_NO_ADMISSIBLE,
            stdout: render(&report, &sys, feedthrough, job.output),
            stderr: format!(
                "error: no admissible critical point found ({} candidates, all rejected)\n",
                report.candidates.len()
            ),
            report: Some(*report),
        },
        Err(e) => failure(e),
    }
}

fn failure(e: Error) -> Outcome {
    Outcome { code: exit_code(e.kind()), stdout: String::new(), stderr: format!("error: {e}\n"), report: None }
}

fn render(report: &ReductionReport, sys: &ValidatedSystem, feedthrough: f64, format: OutputFormat) -> String {
    match format {
        OutputFormat::Text => render_text(report, sys, feedthrough),
        OutputFormat::Structured => render_structured(report, feedthrough),
    }
}

fn poly_text(p: &Polynomial) -> String {
    let c = p.real_coeffs();
    let deg = c.len().saturating_sub(1);
    let mut out = String::new();
    for (k, v) in c.iter().enumerate() {
        let power = deg - k;
        let sign = if v.is_sign_negative() {
            " - "
        } else if k == 0 {
            ""
        } else {
            " + "
        };
        let sign = if k == 0 && v.is_sign_negative() { "-" } else { sign };
        let _ = match power {
            0 => write!(out, "{sign}{:.6e}", v.abs()),
            1 => write!(out, "{sign}{:.6e} s", v.abs()),
            _ => write!(out, "{sign}{:.6e} s^{power}", v.abs()),
        };
    }
    out
}

fn method_name(m: SelectionMethod) -> &'static str {
    match m {
        SelectionMethod::Enumeration => "enumeration",
        SelectionMethod::CriticalValueMatrix => "critical-value-matrix",
    }
}

pub fn render_text(report: &ReductionReport, sys: &ValidatedSystem, feedthrough: f64) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "H2 reduction of order {} to order {}", report.order, report.order.saturating_sub(1));
    let _ = writeln!(o, "  numerator:   {}", poly_text(sys.tf().numerator()));
    let _ = writeln!(o, "  denominator: {}", poly_text(sys.tf().denominator()));
    if feedthrough != 0.0 {
        let _ = writeln!(o, "  feedthrough {feedthrough:.6e} removed (it is carried over unchanged)");
    }
    let _ = writeln!(o, "  system norm {:.6}", report.system_norm);
    let _ = writeln!(o, "  selection method {}", method_name(report.method));
    let _ = writeln!(o);
    let _ = writeln!(o, "candidates ({} nonzero solutions):", report.candidates.len());
    let _ = writeln!(
        o,
        "  {:>4}  {:>12}  {:>24}  {:>5} {:>7}  {:>14}  {:>9}  {:>9}  error",
        "#", "|xi|_inf", "phi", "real", "hurwitz", "status", "ls-resid", "eig-resid"
    );
    for (k, c) in report.candidates.iter().enumerate() {
        let xi_max = c.xi.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let (real, hurwitz, ls) = match &c.point {
            Some(p) => (p.is_real, p.is_hurwitz, format!("{:9.2e}", p.ls_residual)),
            None => (false, false, format!("{:>9}", "-")),
        };
        let status = match c.rejection {
            None if report.global == Some(k) => "GLOBAL".to_string(),
            None => "admissible".to_string(),
            Some(r) => r.to_string(),
        };
        let err = c.h2_error.map_or("-".to_string(), |e| format!("{e:.6}"));
        let _ = writeln!(
            o,
            "  {:>4}  {:12.4e}  {:>24}  {:>5} {:>7}  {:>14}  {}  {:9.2e}  {}",
            k,
            xi_max,
            format!("{:.5e}{:+.1e}i", c.criterion.re, c.criterion.im),
            if real { "yes" } else { "no" },
            if hurwitz { "yes" } else { "no" },
            status,
            ls,
            c.eigvec_residual,
            err
        );
    }
    let admissible: Vec<(usize, &reduce::Candidate)> =
        report.candidates.iter().enumerate().filter(|(_, c)| c.is_admissible()).collect();
    let _ = writeln!(o);
    let _ = writeln!(o, "admissible approximants: {}", admissible.len());
    let mut sorted = admissible.clone();
    sorted.sort_by(|a, b| a.1.criterion.re.partial_cmp(&b.1.criterion.re).unwrap_or(std::cmp::Ordering::Equal));
    for (k, c) in sorted {
        if let Some(p) = &c.point {
            let _ = writeln!(o, "  [{k}] error {:.6}", c.criterion.re.max(0.0).sqrt());
            let _ = writeln!(o, "      b = {}", poly_text(&p.b));
            let _ = writeln!(o, "      a = {}", poly_text(&p.a));
        }
    }
    let _ = writeln!(o);
    match report.global_point() {
        Some(p) => {
            let _ = writeln!(o, "global approximant:");
            let _ = writeln!(o, "  numerator:   {}", poly_text(&p.b));
            let _ = writeln!(o, "  denominator: {}", poly_text(&p.a));
            let _ = writeln!(o, "  absolute error {:.6}", report.global_error);
            let _ = writeln!(o, "  relative error {:.4}%", 100.0 * report.relative_error);
        }
        None => {
            let _ = writeln!(o, "no admissible critical point found");
        }
    }
    let d = &report.diagnostics;
    let _ = writeln!(o);
    let _ = writeln!(o, "diagnostics:");
    let _ = writeln!(o, "  seed {} (eigen attempts {})", d.seed, d.eigen_attempts);
    let _ = writeln!(o, "  Vandermonde condition {:.3e}, M residual {:.3e}", d.vandermonde_cond, d.m_residual);
    let _ = writeln!(
        o,
        "  commutation defect {:.3e}, annihilation defect {:.3e}",
        d.commutation_defect, d.annihilation_defect
    );
    let _ = writeln!(o, "  worst eigenvector residual {:.3e}", d.worst_eigvec_residual);
    let _ = writeln!(o, "  zero solutions removed {}, degenerate q0 {}", d.zero_solutions, d.degenerate_q0);
    let _ = writeln!(
        o,
        "  worst admissible LS residual {:.3e}, worst criterion cross-check {:.3e}",
        d.worst_admissible_ls_residual, d.worst_admissible_crosscheck
    );
    for note in &d.notes {
        let _ = writeln!(o, "  note: {note}");
    }
    for (stage, secs) in &d.timings {
        let _ = writeln!(o, "  time {stage}: {secs:.3}s");
    }
    o
}

/// A float with 17 significant digits, always with an exponent (valid TOML).
fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|&x| fmt_f64(x)).collect();
    format!("[{}]", items.join(", "))
}

fn fmt_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Machine-readable report: a TOML document with explicit field names.
/// Polynomial coefficients are listed in descending order.
pub fn render_structured(report: &ReductionReport, feedthrough: f64) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "format = \"h2reduce-report\"");
    let _ = writeln!(o, "version = 1");
    let _ = writeln!(o, "status = {}", fmt_str(if report.global.is_some() { "ok" } else { "no-admissible" }));
    let _ = writeln!(o, "order = {}", report.order);
    let _ = writeln!(o, "method = {}", fmt_str(method_name(report.method)));
    let _ = writeln!(o, "system_norm = {}", fmt_f64(report.system_norm));
    let _ = writeln!(o, "feedthrough = {}", fmt_f64(feedthrough));
    let _ = writeln!(o, "critical_values_sorted = {}", fmt_list(&report.critical_values_sorted));
    if let (Some(k), Some(p)) = (report.global, report.global_point()) {
        let _ = writeln!(o);
        let _ = writeln!(o, "[global]");
        let _ = writeln!(o, "candidate = {k}");
        let _ = writeln!(o, "error = {}", fmt_f64(report.global_error));
        let _ = writeln!(o, "relative_error = {}", fmt_f64(report.relative_error));
        let _ = writeln!(o, "numerator = {}", fmt_list(&p.b.real_coeffs()));
        let _ = writeln!(o, "denominator = {}", fmt_list(&p.a.real_coeffs()));
    }
    let d = &report.diagnostics;
    let _ = writeln!(o);
    let _ = writeln!(o, "[diagnostics]");
    let _ = writeln!(o, "seed = {}", d.seed);
    let _ = writeln!(o, "eigen_attempts = {}", d.eigen_attempts);
    let _ = writeln!(o, "vandermonde_cond = {}", fmt_f64(d.vandermonde_cond));
    let _ = writeln!(o, "m_residual = {}", fmt_f64(d.m_residual));
    let _ = writeln!(o, "commutation_defect = {}", fmt_f64(d.commutation_defect));
    let _ = writeln!(o, "annihilation_defect = {}", fmt_f64(d.annihilation_defect));
    let _ = writeln!(o, "worst_eigvec_residual = {}", fmt_f64(d.worst_eigvec_residual));
    let _ = writeln!(o, "zero_solutions = {}", d.zero_solutions);
    let _ = writeln!(o, "degenerate_q0 = {}", d.degenerate_q0);
    let _ = writeln!(o, "worst_admissible_ls_residual = {}", fmt_f64(d.worst_admissible_ls_residual));
    let _ = writeln!(o, "worst_admissible_crosscheck = {}", fmt_f64(d.worst_admissible_crosscheck));
    let notes: Vec<String> = d.notes.iter().map(|n| fmt_str(n)).collect();
    let _ = writeln!(o, "notes = [{}]", notes.join(", "));
    for (k, c) in report.candidates.iter().enumerate() {
        let _ = writeln!(o);
        let _ = writeln!(o, "[[candidates]]");
        let _ = writeln!(o, "index = {k}");
        let _ = writeln!(o, "xi_re = {}", fmt_list(&c.xi.iter().map(|z| z.re).collect::<Vec<_>>()));
        let _ = writeln!(o, "xi_im = {}", fmt_list(&c.xi.iter().map(|z| z.im).collect::<Vec<_>>()));
        let _ = writeln!(o, "criterion_re = {}", fmt_f64(c.criterion.re));
        let _ = writeln!(o, "criterion_im = {}", fmt_f64(c.criterion.im));
        let _ = writeln!(o, "admissible = {}", c.is_admissible());
        let _ = writeln!(o, "rejection = {}", fmt_str(&c.rejection.map_or(String::new(), |r| r.to_string())));
        let _ = writeln!(o, "eigvec_residual = {}", fmt_f64(c.eigvec_residual));
        if let Some(e) = c.h2_error {
            let _ = writeln!(o, "h2_error = {}", fmt_f64(e));
        }
        if let Some(p) = &c.point {
            let _ = writeln!(o, "is_real = {}", p.is_real);
            let _ = writeln!(o, "is_hurwitz = {}", p.is_hurwitz);
            let _ = writeln!(o, "ls_residual = {}", fmt_f64(p.ls_residual));
            let _ = writeln!(o, "foc_residual = {}", fmt_f64(p.foc_residual));
            if p.is_real {
                let _ = writeln!(o, "numerator = {}", fmt_list(&p.b.real_coeffs()));
                let _ = writeln!(o, "denominator = {}", fmt_list(&p.a.real_coeffs()));
            }
        }
    }
    o
}

/// The `[global]` section of a structured report.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StructuredGlobal {
    pub candidate: usize,
    pub error: f64,
    pub relative_error: f64,
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct StructuredHead {
    format: String,
    global: Option<StructuredGlobal>,
}

/// Reads back the global approximant of a structured report.
pub fn parse_structured_global(text: &str) -> Result<Option<StructuredGlobal>> {
    let head: StructuredHead =
        toml::from_str(text).map_err(|e| Error::Input(format!("malformed structured report: {e}")))?;
    if head.format != "h2reduce-report" {
        return Err(Error::Input(format!("format: unexpected value {:?}", head.format)));
    }
    Ok(head.global)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> Args {
        Args::parse_from(std::iter::once("h2reduce").chain(extra.iter().copied()))
    }

    #[test]
    fn relaxation_generator_examples() {
        let tf = generate_relaxation(1, 2.0).unwrap();
        assert_eq!(tf.numerator().real_coeffs(), vec![4.0]);
        assert_eq!(tf.denominator().real_coeffs(), vec![1.0, 4.0]);
        let tf = generate_relaxation(2, 2.0).unwrap();
        assert_eq!(tf.numerator().real_coeffs(), vec![20.0, 128.0]);
        assert_eq!(tf.denominator().real_coeffs(), vec![1.0, 20.0, 64.0]);
        assert!(matches!(generate_relaxation(3, 1.0), Err(Error::DegenerateRelaxation { .. })));
    }

    #[test]
    fn relaxation_norm() {
        let (sys, _) = build_system(&SystemInput::Relaxation { n: 5, alpha: 0.78 }, false).unwrap();
        assert!((tf::h2_norm(&sys) - 1.6980).abs() < 1e-3);
    }

    #[test]
    fn parses_both_forms_and_comments() {
        let s = parse_system("# a comment\nnumerator = [1.0, 3.0]\ndenominator = [1, 3, 2] # trailing\n").unwrap();
        assert_eq!(s, SystemInput::Coefficients { numerator: vec![1.0, 3.0], denominator: vec![1.0, 3.0, 2.0] });
        let s = parse_system("poles = [\"-1,2\", [-1.0, -2.0], -3]\nresidues = [\"0.5, 1\", \"0.5,-1\", 1.0]").unwrap();
        let SystemInput::PoleResidue { poles, residues } = s else { panic!() };
        assert_eq!(poles[0], Complex64::new(-1.0, 2.0));
        assert_eq!(poles[1], Complex64::new(-1.0, -2.0));
        assert_eq!(poles[2], Complex64::new(-3.0, 0.0));
        assert_eq!(residues[0], Complex64::new(0.5, 1.0));
    }

    #[test]
    fn malformed_input_names_the_field() {
        for (text, field) in [
            ("numerator = [1.0]", "denominator"),
            ("poles = [\"-1,x\"]\nresidues = [1.0]", "poles[0]"),
            ("poles = [-1.0]\nresidues = [1.0, 2.0]", "residues"),
            ("numerator = [1.0]\ndenominator = [1.0, 1.0]\npoles = [-1.0]\nresidues = [1.0]", "either"),
            ("numerator = [1.0\n", "malformed"),
        ] {
            let err = parse_system(text).unwrap_err();
            assert_eq!(err.kind(), ErrorKind::Input);
            assert!(err.to_string().contains(field), "{err} lacks {field}");
        }
    }

    #[test]
    fn flags_map_to_options() {
        let job = JobSpec::from_args(&args(&[
            "--relaxation",
            "N=5",
            "alpha=0.78",
            "--method",
            "cvm",
            "--seed",
            "7",
            "--profile",
            "loose",
            "--tol-eig",
            "1e-6",
        ]))
        .unwrap();
        assert_eq!(job.input, SystemInput::Relaxation { n: 5, alpha: 0.78 });
        assert_eq!(job.options.method, SelectionMethod::CriticalValueMatrix);
        assert_eq!(job.options.seed, 7);
        assert_eq!(job.options.recovery.real, 1e-4);
        assert_eq!(job.options.stetter.residual, 1e-6);
        assert_eq!(job.options.cap, DEFAULT_CLI_CAP);
        assert!(JobSpec::from_args(&args(&["--relaxation", "N=5", "alpha=0.5", "--cap", "15"])).is_err());
        assert!(JobSpec::from_args(&args(&[])).is_err());
    }

    #[test]
    fn repeated_pole_exits_with_validation_code() {
        let job = JobSpec::from_args(&args(&["--inline", "numerator = [1.0]; denominator = [1.0, 2.0, 1.0]"])).unwrap();
        let out = run(&job);
        assert_eq!(out.code, EXIT_VALIDATION);
        assert!(out.stderr.contains("repeated pole"), "{}", out.stderr);
    }

    #[test]
    fn small_relaxation_fails_with_a_typed_code() {
        let job = JobSpec::from_args(&args(&["--relaxation", "N=5", "alpha=0.30"])).unwrap();
        let out = run(&job);
        assert!(out.code == EXIT_NO_ADMISSIBLE || out.code == EXIT_NUMERICAL, "exit {}", out.code);
        assert!(!out.stderr.is_empty());
    }

    #[test]
    fn structured_global_round_trips_bit_exactly() {
        let job = JobSpec::from_args(&args(&[
            "--inline",
            "numerator = [1.0, 0.5, 2.0]; denominator = [1.0, 3.0, 7.0, 5.0]",
            "--output",
            "structured",
        ]))
        .unwrap();
        let out = run(&job);
        assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
        let report = out.report.unwrap();
        let p = report.global_point().unwrap();
        let g = parse_structured_global(&out.stdout).unwrap().unwrap();
        assert_eq!(g.numerator, p.b.real_coeffs());
        assert_eq!(g.denominator, p.a.real_coeffs());
        assert_eq!(g.error.to_bits(), report.global_error.to_bits());
        assert_eq!(g.candidate, report.global.unwrap());
        let whole: toml::Value = toml::from_str(&out.stdout).unwrap();
        assert_eq!(whole["candidates"].as_array().unwrap().len(), report.candidates.len());
    }

    #[test]
    fn float_formatting_has_seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        for x in [std::f64::consts::PI, -1e-300, 123456789.123, 5e-324] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn text_report_lists_the_essentials() {
        let job = JobSpec::from_args(&args(&["--relaxation", "N=3", "alpha=0.7"])).unwrap();
        let out = run(&job);
        assert_eq!(out.code, EXIT_OK, "{}", out.stderr);
        for needle in [
            "system norm",
            "candidates",
            "GLOBAL",
            "global approximant",
            "absolute error",
            "relative error",
            "diagnostics",
        ] {
            assert!(out.stdout.contains(needle), "missing {needle}");
        }
    }
}
