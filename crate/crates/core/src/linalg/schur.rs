//! Complex Schur decomposition `M = Q U Q^H` via Householder reduction to
//! Hessenberg form followed by shifted QR iteration, plus reordering of the
//! triangular factor by adjacent Givens swaps.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::{Float, Zero};

use crate::error::{Error, Result};
use crate::matrix::{c64, Matrix, C64};

#[derive(Debug, Clone)]
pub struct Schur {
    /// Unitary factor.
    pub q: Matrix,
    /// Upper triangular factor; its diagonal carries the eigenvalues.
    pub t: Matrix,
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.rows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Moves every diagonal entry selected by `select` to the leading
    /// positions (stable with respect to the original order) and returns how
    /// many were selected. The first columns of `q` then span the invariant
    /// subspace belonging to the selected eigenvalues.
    pub fn reorder_leading(&mut self, select: &[bool]) -> usize {
        let n = self.t.rows();
        assert_eq!(select.len(), n);
        let mut flags = select.to_vec();
        let mut placed = 0;
        for k in 0..n {
            if !flags[k] {
                continue;
            }
            let mut pos = k;
            while pos > placed {
                self.swap_adjacent(pos - 1);
                flags.swap(pos - 1, pos);
                pos -= 1;
            }
            placed += 1;
        }
        placed
    }

    /// Swaps diagonal entries `k` and `k+1` with a unitary similarity.
    fn swap_adjacent(&mut self, k: usize) {
        let n = self.t.rows();
        let t11 = self.t[(k, k)];
        let t22 = self.t[(k + 1, k + 1)];
        let (cs, sn) = givens(self.t[(k, k + 1)], t22 - t11);
        // Rows k, k+1 to the right of the 2x2 block.
        for j in (k + 2)..n {
            let x = self.t[(k, j)];
            let y = self.t[(k + 1, j)];
            self.t[(k, j)] = x * cs + sn * y;
            self.t[(k + 1, j)] = y * cs - sn.conj() * x;
        }
        // Columns k, k+1 above the block.
        let snc = sn.conj();
        for i in 0..k {
            let x = self.t[(i, k)];
            let y = self.t[(i, k + 1)];
            self.t[(i, k)] = x * cs + snc * y;
            self.t[(i, k + 1)] = y * cs - snc.conj() * x;
        }
        self.t[(k, k)] = t22;
        self.t[(k + 1, k + 1)] = t11;
        for i in 0..n {
            let x = self.q[(i, k)];
            let y = self.q[(i, k + 1)];
            self.q[(i, k)] = x * cs + snc * y;
            self.q[(i, k + 1)] = y * cs - snc.conj() * x;
        }
    }
}

/// Plane rotation `(c, s)` with real `c` such that
/// `[c s; -conj(s) c] [f; g] = [r; 0]`.
fn givens(f: C64, g: C64) -> (f64, C64) {
    if g.is_zero() {
        return (1.0, C64::zero());
    }
    if f.is_zero() {
        return (0.0, g.conj() / g.norm());
    }
    let fa = f.norm();
    let norm = fa.hypot(g.norm());
    let c = fa / norm;
    let s = (f / fa) * g.conj() / norm;
    (c, s)
}

/// Complex Schur decomposition of a square matrix.
pub fn schur(m: &Matrix) -> Result<Schur> {
    let n = m.ensure_square()?;
    let mut h = m.clone();
    let mut q = Matrix::identity(n);
    hessenberg(&mut h, &mut q);
    qr_iterate(&mut h, &mut q)?;
    // Clean the strictly lower part left over from deflation.
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = C64::zero();
        }
    }
    Ok(Schur { q, t: h })
}

fn hessenberg(h: &mut Matrix, q: &mut Matrix) {
    let n = h.rows();
    if n < 3 {
        return;
    }
    for k in 0..(n - 2) {
        let x: Vec<C64> = ((k + 1)..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = x[0];
        let alpha = if x0.norm() == 0.0 { c64(-xnorm, 0.0) } else { -(x0 / x0.norm()) * xnorm };
        let mut v = x;
        v[0] -= alpha;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if vnorm == 0.0 {
            continue;
        }
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // H <- (I - 2 v v^H) H on rows k+1..n
        for j in 0..n {
            let s: C64 = v.iter().enumerate().map(|(r, vr)| vr.conj() * h[(k + 1 + r, j)]).sum();
            for (r, vr) in v.iter().enumerate() {
                h[(k + 1 + r, j)] -= *vr * s * 2.0;
            }
        }
        // H <- H (I - 2 v v^H) on columns k+1..n, same for Q.
        for i in 0..n {
            let s: C64 = v.iter().enumerate().map(|(r, vr)| h[(i, k + 1 + r)] * vr).sum();
            for (r, vr) in v.iter().enumerate() {
                h[(i, k + 1 + r)] -= s * vr.conj() * 2.0;
            }
            let s: C64 = v.iter().enumerate().map(|(r, vr)| q[(i, k + 1 + r)] * vr).sum();
            for (r, vr) in v.iter().enumerate() {
                q[(i, k + 1 + r)] -= s * vr.conj() * 2.0;
            }
        }
        for i in (k + 2)..n {
            h[(i, k)] = C64::zero();
        }
    }
}

fn qr_iterate(h: &mut Matrix, q: &mut Matrix) -> Result<()> {
    let n = h.rows();
    if n == 0 {
        return Ok(());
    }
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iter = 0usize;
    let max_iter = 60 * n.max(4);
    // A subdiagonal of order eps ||H|| is a backward-stable deflation even
    // when the neighbouring diagonal is small. Nearly equal eigenvalues can
    // leave the iteration churning at roundoff level, so the allowance grows
    // slowly with the number of steps since the last deflation.
    let h_norm = h.frobenius_norm();
    while hi > 0 {
        // Deflation scan.
        let mut lo = hi;
        while lo > 0 {
            let sub = h[(lo, lo - 1)].norm();
            let diag = h[(lo, lo)].norm() + h[(lo - 1, lo - 1)].norm();
            let scale = if diag == 0.0 { h.max_abs() } else { diag };
            if sub <= eps * scale || sub <= eps * h_norm * (1.0 + iter as f64) {
                h[(lo, lo - 1)] = C64::zero();
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            iter = 0;
            continue;
        }
        if hi == lo + 1 {
            // Shifted iteration stalls near sqrt(eps) on a nearly defective
            // 2x2 window; rotate onto an eigenvector instead.
            iter += 1;
            if iter > max_iter {
                return Err(Error::NoConvergence);
            }
            triangularize_2x2(h, q, lo);
            continue;
        }
        iter += 1;
        if iter > max_iter {
            return Err(Error::NoConvergence);
        }
        let shift = if iter % 11 == 0 {
            // Exceptional shift to break cycles.
            h[(hi, hi)] + c64(h[(hi, hi - 1)].norm() * 0.75, 0.0)
        } else {
            wilkinson_shift(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)])
        };
        qr_step(h, q, lo, hi, shift);
    }
    Ok(())
}

fn triangularize_2x2(h: &mut Matrix, q: &mut Matrix, k: usize) {
    let n = h.rows();
    let (a, b, c, d) = (h[(k, k)], h[(k, k + 1)], h[(k + 1, k)], h[(k + 1, k + 1)]);
    let lambda = wilkinson_shift(a, b, c, d);
    let (v1, v2) = (b, lambda - a);
    let (w1, w2) = (lambda - d, c);
    let (f, g) = if v1.norm() + v2.norm() >= w1.norm() + w2.norm() { (v1, v2) } else { (w1, w2) };
    let (cs, sn) = givens(f, g);
    for j in k..n {
        let x = h[(k, j)];
        let y = h[(k + 1, j)];
        h[(k, j)] = x * cs + sn * y;
        h[(k + 1, j)] = y * cs - sn.conj() * x;
    }
    let snc = sn.conj();
    for i in 0..=(k + 1) {
        let x = h[(i, k)];
        let y = h[(i, k + 1)];
        h[(i, k)] = x * cs + snc * y;
        h[(i, k + 1)] = y * cs - sn * x;
    }
    for i in 0..n {
        let x = q[(i, k)];
        let y = q[(i, k + 1)];
        q[(i, k)] = x * cs + snc * y;
        q[(i, k + 1)] = y * cs - sn * x;
    }
}

/// Eigenvalue of `[a b; c d]` closest to `d`, without cancellation in the
/// discriminant.
fn wilkinson_shift(a: C64, b: C64, c: C64, d: C64) -> C64 {
    let p = (a - d) * 0.5;
    let bc = b * c;
    let mut disc = (p * p + bc).sqrt();
    if (p.conj() * disc).re < 0.0 {
        disc = -disc;
    }
    let denom = p + disc;
    if denom.is_zero() {
        d
    } else {
        d - bc / denom
    }
}

fn qr_step(h: &mut Matrix, q: &mut Matrix, lo: usize, hi: usize, shift: C64) {
    let n = h.rows();
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    let mut rots: Vec<(f64, C64)> = Vec::with_capacity(hi - lo);
    for k in lo..hi {
        let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
        for j in k..n {
            let x = h[(k, j)];
            let y = h[(k + 1, j)];
            h[(k, j)] = x * c + s * y;
            h[(k + 1, j)] = y * c - s.conj() * x;
        }
        h[(k + 1, k)] = C64::zero();
        rots.push((c, s));
    }
    for (idx, k) in (lo..hi).enumerate() {
        let (c, s) = rots[idx];
        let sc = s.conj();
        let top = (k + 2).min(hi + 1);
        for i in 0..top {
            let x = h[(i, k)];
            let y = h[(i, k + 1)];
            h[(i, k)] = x * c + sc * y;
            h[(i, k + 1)] = y * c - s * x;
        }
        for i in 0..n {
            let x = q[(i, k)];
            let y = q[(i, k + 1)];
            q[(i, k)] = x * c + sc * y;
            q[(i, k + 1)] = y * c - s * x;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}
