//! Dense complex-matrix kernel: eigenvalues, singular values, rank and
//! kernel, linear solves, the matrix exponential and norms.
//!
//! Every numerical decision downstream (zero eigenvalue, negative
//! eigenvalue, rank of a power) goes through the thresholds in
//! [`Tolerances`], so they are explicit and reportable.

mod expm;
mod lu;
mod schur;
mod svd;

use alloc::vec::Vec;


pub use expm::expm;
pub use schur::{schur, Schur};
pub use svd::{orthonormal_span, svd, Svd};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, C64};

pub(crate) use lu::Lu;

/// Classification thresholds used by every decision procedure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative singular-value cutoff for rank decisions.
    pub rank_tol: f64,
    /// Relative radius for grouping computed eigenvalues.
    pub eig_cluster_tol: f64,
    /// Acceptance threshold for residuals.
    pub verify_tol: f64,
    /// Slack allowed below zero when testing signs of entries.
    pub positivity_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { rank_tol: 1e-10, eig_cluster_tol: 1e-8, verify_tol: 1e-8, positivity_tol: 1e-12 }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [self.rank_tol, self.eig_cluster_tol, self.verify_tol, self.positivity_tol];
        if all.iter().all(|t| t.is_finite() && *t >= 0.0) {
            Ok(())
        } else {
            Err(Error::Domain("tolerances must be finite and nonnegative".into()))
        }
    }
}

/// Eigenvalues with algebraic multiplicity, in the order they appear on
/// the diagonal of the Schur factor.
pub fn eigenvalues(m: &Matrix) -> Result<Vec<C64>> {
    m.ensure_square()?;
    Ok(schur(m)?.eigenvalues())
}

/// Numerical rank and an orthonormal kernel basis.
///
/// The rank counts singular values above `rank_tol * sigma_max`.
pub fn rank_and_kernel(m: &Matrix, tol: &Tolerances) -> (usize, Vec<Vec<C64>>) {
    let s = svd(m);
    let r = s.rank(tol.rank_tol);
    let kernel = (r..m.cols()).map(|j| s.v.column(j)).collect();
    (r, kernel)
}

pub fn rank(m: &Matrix, tol: &Tolerances) -> usize {
    svd(m).rank(tol.rank_tol)
}

/// Spectral norm (largest singular value).
pub fn opnorm(m: &Matrix) -> f64 {
    svd(m).largest()
}

/// 2-norm condition number; infinite for singular input.
pub fn condition_number(m: &Matrix) -> f64 {
    let s = svd(m);
    let small = s.singular_values.last().copied().unwrap_or(0.0);
    if small == 0.0 {
        f64::INFINITY
    } else {
        s.largest() / small
    }
}

fn ensure_nonsingular(m: &Matrix, tol: &Tolerances) -> Result<()> {
    let n = m.ensure_square()?;
    if n == 0 {
        return Ok(());
    }
    if svd(m).rank(tol.rank_tol) < n {
        return Err(Error::Singular);
    }
    Ok(())
}

/// Solves `M X = B` for square, numerically nonsingular `M`.
pub fn solve(m: &Matrix, b: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    ensure_nonsingular(m, tol)?;
    if b.rows() != m.rows() {
        return Err(Error::Dimension { expected: m.rows(), found: b.rows() });
    }
    Ok(Lu::new(m)?.solve(b))
}

pub fn inverse(m: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    solve(m, &Matrix::identity(m.rows()), tol)
}

/// Determinant (exactly zero only for an exactly zero pivot).
pub fn det(m: &Matrix) -> Result<C64> {
    m.ensure_square()?;
    match Lu::new(m) {
        Ok(lu) => Ok(lu.det()),
        Err(Error::Singular) => Ok(C64::new(0.0, 0.0)),
        Err(e) => Err(e),
    }
}

/// Classification of a computed eigenvalue relative to the matrix it came
/// from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenClass {
    Zero,
    NegativeReal,
    PositiveReal,
    NonReal,
}

/// `|lambda| <= eig_cluster_tol * (1 + matrix_norm)` is zero; otherwise
/// an eigenvalue with `|Im| <= eig_cluster_tol * (1 + |lambda|)` is real and
/// its sign is read off the real part with the same margin.
pub fn classify_eigenvalue(lambda: C64, matrix_norm: f64, tol: &Tolerances) -> EigenClass {
    let t = tol.eig_cluster_tol;
    if lambda.norm() <= t * (1.0 + matrix_norm) {
        return EigenClass::Zero;
    }
    let margin = t * (1.0 + lambda.norm());
    if lambda.im.abs() <= margin {
        if lambda.re < -margin {
            return EigenClass::NegativeReal;
        }
        if lambda.re > margin {
            return EigenClass::PositiveReal;
        }
    }
    EigenClass::NonReal
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::c64;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());
        v
    }

    #[test]
    fn eigenvalue_examples() {
        let ev = sorted(eigenvalues(&Matrix::from_real_diag(&[2.0, 3.0])).unwrap());
        assert!((ev[0] - c64(2.0, 0.0)).norm() < 1e-14 && (ev[1] - c64(3.0, 0.0)).norm() < 1e-14);

        let ev = sorted(eigenvalues(&Matrix::from_real_rows(&[[0.0, 1.0], [-1.0, 0.0]])).unwrap());
        assert!((ev[0] - c64(0.0, -1.0)).norm() < 1e-14 && (ev[1] - c64(0.0, 1.0)).norm() < 1e-14);

        // Characteristic polynomial x^2 - 4x + 3 = (x - 1)(x - 3).
        let ev = sorted(eigenvalues(&Matrix::from_real_rows(&[[2.0, 1.0], [1.0, 2.0]])).unwrap());
        assert!((ev[0] - c64(1.0, 0.0)).norm() < 1e-14 && (ev[1] - c64(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn eigenvalues_reject_non_square() {
        assert!(matches!(eigenvalues(&Matrix::zeros(2, 3)), Err(Error::NotSquare { .. })));
    }

    #[test]
    fn rank_and_kernel_examples() {
        let tol = Tolerances::default();
        let (r, k) = rank_and_kernel(&Matrix::zeros(3, 3), &tol);
        assert_eq!((r, k.len()), (0, 3));
        let (r, k) = rank_and_kernel(&Matrix::identity(3), &tol);
        assert_eq!((r, k.len()), (3, 0));
        let (r, k) = rank_and_kernel(&Matrix::from_real_rows(&[[1.0, 1.0], [1.0, 1.0]]), &tol);
        assert_eq!(r, 1);
        let v = &k[0];
        // (1, -1)/sqrt(2) up to a unimodular factor.
        let ratio = v[1] / v[0];
        assert!((ratio - c64(-1.0, 0.0)).norm() < 1e-12);
        assert!((v[0].norm() - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn expm_examples() {
        assert_eq!(expm(&Matrix::zeros(3, 3)), Matrix::identity(3));
        let e = expm(&Matrix::from_real_rows(&[[0.0, 1.0], [0.0, 0.0]]));
        assert!((&e - &Matrix::from_real_rows(&[[1.0, 1.0], [0.0, 1.0]])).max_abs() < 1e-15);
        let a = Matrix::from_real_rows(&[[1.0, 1.0], [1.0, 1.0]]).scale_real(3f64.ln() / 2.0);
        let e = expm(&a);
        assert!((&e - &Matrix::from_real_rows(&[[2.0, 1.0], [1.0, 2.0]])).max_abs() < 1e-14);
    }

    #[test]
    fn solve_examples() {
        let tol = Tolerances::default();
        let b = Matrix::from_real_rows(&[[1.0, 2.0], [3.0, 4.0]]);
        let x = solve(&Matrix::identity(2), &b, &tol).unwrap();
        assert!((&x - &b).max_abs() < 1e-15);
        let x = solve(&Matrix::from_real_diag(&[2.0, 4.0]), &Matrix::identity(2), &tol).unwrap();
        assert!((&x - &Matrix::from_real_diag(&[0.5, 0.25])).max_abs() < 1e-15);
        let x = solve(
            &Matrix::from_real_rows(&[[1.0, 1.0], [0.0, 1.0]]),
            &Matrix::from_real_rows(&[[1.0], [1.0]]),
            &tol,
        )
        .unwrap();
        assert!((&x - &Matrix::from_real_rows(&[[0.0], [1.0]])).max_abs() < 1e-15);
        let singular = Matrix::from_real_rows(&[[1.0, 2.0], [2.0, 4.0]]);
        assert_eq!(solve(&singular, &b, &tol), Err(Error::Singular));
    }

    #[test]
    fn opnorm_examples() {
        assert!((opnorm(&Matrix::identity(4)) - 1.0).abs() < 1e-14);
        assert!((opnorm(&Matrix::from_real_diag(&[3.0, -1.0])) - 3.0).abs() < 1e-14);
        assert!((opnorm(&Matrix::from_real_rows(&[[0.0, 2.0], [0.0, 0.0]])) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn classification_thresholds() {
        let tol = Tolerances::default();
        assert_eq!(classify_eigenvalue(c64(-1.0, 1e-12), 1.0, &tol), EigenClass::NegativeReal);
        assert_eq!(classify_eigenvalue(c64(-1.0, 1e-6), 1.0, &tol), EigenClass::NonReal);
        assert_eq!(classify_eigenvalue(c64(1e-9, 0.0), 1.0, &tol), EigenClass::Zero);
        assert_eq!(classify_eigenvalue(c64(2.0, 0.0), 1.0, &tol), EigenClass::PositiveReal);
    }
}
