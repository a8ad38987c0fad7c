//! LU factorisation with partial pivoting.

use alloc::vec::Vec;

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::matrix::{c64, Matrix, C64};

pub(crate) struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    /// Factorises a square matrix. Fails only on an exactly zero pivot;
    /// numerical singularity is judged by callers with singular values.
    pub(crate) fn new(m: &Matrix) -> Result<Self> {
        let n = m.ensure_square()?;
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in (k + 1)..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::Singular);
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                if f.is_zero() {
                    continue;
                }
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub(crate) fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.lu.rows();
        assert_eq!(b.rows(), n);
        let mut x = Matrix::from_fn(n, b.cols(), |i, j| b[(self.perm[i], j)]);
        for c in 0..b.cols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in (i + 1)..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        x
    }

    pub(crate) fn det(&self) -> C64 {
        let n = self.lu.rows();
        (0..n).fold(c64(self.sign, 0.0), |acc, i| acc * self.lu[(i, i)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_with_pivoting() {
        let a = Matrix::from_real_rows(&[[0.0, 1.0], [2.0, 3.0]]);
        let lu = Lu::new(&a).unwrap();
        let x = lu.solve(&Matrix::identity(2));
        let prod = a.matmul(&x);
        assert!((&prod - &Matrix::identity(2)).frobenius_norm() < 1e-15);
        assert!((lu.det() - c64(-2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_pivot_is_singular() {
        let a = Matrix::zeros(2, 2);
        assert!(matches!(Lu::new(&a), Err(Error::Singular)));
    }
}
