//! Global H2-optimal reduction of a stable SISO system with distinct poles by one
//! degree.
//!
//! The first-order conditions for the best approximant of order `N − 1` are
//! rewritten as a diagonal-quadratic polynomial system in `N` unknowns. Its
//! solutions are the common eigenvalue tuples of `N` commuting `2^N × 2^N`
//! multiplication matrices, so every critical point is found and the global
//! optimum is certified by comparing criterion values.
//!
//! ```no_run
//! use h2reduce::{reduce, tf};
//!
//! let g = tf::TransferFunction::new(&[1.0, 0.3, 2.0], &[1.0, 4.5, 6.5, 3.0])?;
//! let sys = tf::validate(&g, &Default::default())?;
//! let report = reduce::solve_reduction(&sys, &Default::default())?;
//! println!("global error {}", report.global_error);
//! # Ok::<(), h2reduce::Error>(())
//! ```

// Tolerance checks are written as `!(x <= tol)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dqideal;
pub mod error;
pub mod foc;
pub mod linalg;
pub mod poly;
pub mod reduce;
pub mod stetter;
pub mod tf;

pub use error::{Error, ErrorKind, Result};
