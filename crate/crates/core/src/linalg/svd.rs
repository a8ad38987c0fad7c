//! One-sided (Hestenes) Jacobi SVD for complex matrices.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::matrix::{c64, dot, Matrix, C64};

const MAX_SWEEPS: usize = 80;

/// Singular values (descending) and the matching right singular vectors.
#[derive(Debug, Clone)]
pub struct Svd {
    pub singular_values: Vec<f64>,
    /// Columns are right singular vectors, ordered like `singular_values`.
    pub v: Matrix,
    /// Columns `A v_j` (not normalised); `u_j = w_j / sigma_j` for nonzero sigma.
    pub w: Matrix,
}

impl Svd {
    pub fn largest(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Number of singular values above `rel_tol * largest`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let cut = rel_tol * self.largest();
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }

    /// Left singular vectors of the leading `k` singular values.
    pub fn leading_left(&self, k: usize) -> Vec<Vec<C64>> {
        (0..k)
            .map(|j| {
                let s = self.singular_values[j];
                self.w.column(j).into_iter().map(|z| z / s).collect()
            })
            .collect()
    }
}

/// Computes the SVD of an arbitrary `m x n` matrix (all `n` singular values,
/// some of which are zero when `m < n`).
pub fn svd(a: &Matrix) -> Svd {
    let m = a.rows();
    let n = a.cols();
    // Work column-major for cache-friendly column rotations.
    let mut cols: Vec<Vec<C64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<C64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { c64(1.0, 0.0) } else { c64(0.0, 0.0) }).collect())
        .collect();

    let eps = f64::EPSILON;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha: f64 = cols[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = cols[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = dot(&cols[p], &cols[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let phase = (gamma / g).conj();
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s, phase);
                rotate(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<(f64, usize)> = cols
        .iter()
        .enumerate()
        .map(|(j, c)| (c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(), j))
        .collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal));

    let singular_values = order.iter().map(|&(s, _)| s).collect();
    let v_mat = Matrix::from_fn(n, n, |i, j| v[order[j].1][i]);
    let w_mat = Matrix::from_fn(m, n, |i, j| cols[order[j].1][i]);
    Svd { singular_values, v: v_mat, w: w_mat }
}

fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let (left, right) = cols.split_at_mut(q);
    let cp = &mut left[p];
    let cq = &mut right[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let yq = *y * phase;
        let xp = *x;
        *x = xp * c - yq * s;
        *y = xp * s + yq * c;
    }
}

/// Orthonormal basis (as columns) for the span of the given vectors, using
/// the singular-value cutoff `rel_tol`.
pub fn orthonormal_span(vectors: &[Vec<C64>], rel_tol: f64) -> Vec<Vec<C64>> {
    if vectors.is_empty() {
        return Vec::new();
    }
    let a = Matrix::from_columns(vectors);
    let s = svd(&a);
    let r = s.rank(rel_tol);
    s.leading_left(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn singular_values_of_rank_one() {
        let a = Matrix::from_real_rows(&[[1.0, 1.0], [1.0, 1.0]]);
        let s = svd(&a);
        assert!((s.singular_values[0] - 2.0).abs() < 1e-14);
        assert!(s.singular_values[1].abs() < 1e-14);
    }

    #[test]
    fn complex_input_reconstructs() {
        let a = Matrix::from_fn(3, 3, |i, j| c64((i + 2 * j) as f64 * 0.3 - 0.5, (i as f64 - j as f64) * 0.7));
        let s = svd(&a);
        // A V = W, and W has orthogonal columns.
        let av = a.matmul(&s.v);
        assert!((&av - &s.w).frobenius_norm() < 1e-12);
        for p in 0..3 {
            for q in (p + 1)..3 {
                assert!(dot(&s.w.column(p), &s.w.column(q)).norm() < 1e-12);
            }
        }
        let vv = s.v.adjoint().matmul(&s.v);
        assert!((&vv - &Matrix::identity(3)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn wide_matrix_has_kernel() {
        let a = Matrix::from_real_rows(&[[1.0, 2.0, 3.0]]);
        let s = svd(&a);
        assert_eq!(s.rank(1e-10), 1);
        assert!((s.singular_values[0] - 14f64.sqrt()).abs() < 1e-13);
    }
}
