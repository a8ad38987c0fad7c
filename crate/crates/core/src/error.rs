use alloc::string::String;
use core::fmt;

use crate::matrix::C64;

/// Errors raised by the numerical routines and the decision procedures.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    NotSquare { rows: usize, cols: usize },
    Dimension { expected: usize, found: usize },
    /// Matrix is numerically singular at the configured rank tolerance.
    Singular,
    /// The eigenvalue iteration did not converge.
    NoConvergence,
    /// Jordan structure could not be extracted unambiguously near `cluster`.
    StructureAmbiguous { cluster: C64, detail: String },
    /// Input is not real embeddable; the constructor refuses it.
    NotEmbeddable(String),
    /// An entry is negative beyond the positivity tolerance.
    NotPositive { min_entry: f64 },
    /// An argument lies outside the domain of the operation.
    Domain(String),
    /// No matrix with the requested property exists for these parameters.
    Infeasible(String),
    /// A constructed object failed its residual check.
    Verification { residual: f64, tolerance: f64 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotSquare { rows, cols } => write!(f, "matrix is not square ({rows}x{cols})"),
            Error::Dimension { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::Singular => write!(f, "matrix is numerically singular"),
            Error::NoConvergence => write!(f, "eigenvalue iteration did not converge"),
            Error::StructureAmbiguous { cluster, detail } => write!(
                f,
                "Jordan structure ambiguous near eigenvalue {:.6e}{:+.6e}i: {detail}",
                cluster.re, cluster.im
            ),
            Error::NotEmbeddable(why) => write!(f, "matrix is not embeddable: {why}"),
            Error::NotPositive { min_entry } => {
                write!(f, "matrix is not positive (minimum entry {min_entry:e})")
            }
            Error::Domain(why) => write!(f, "domain error: {why}"),
            Error::Infeasible(why) => write!(f, "infeasible: {why}"),
            Error::Verification { residual, tolerance } => {
                write!(f, "residual {residual:e} exceeds tolerance {tolerance:e}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T, E = Error> = core::result::Result<T, E>;
