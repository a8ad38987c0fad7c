//! Numerical Jordan structure.
//!
//! Eigenvalues are read off a complex Schur form and grouped into clusters.
//! A defective eigenvalue of multiplicity `m` is scattered by roundoff over a
//! disc of radius about `eps^(1/m)`, so the grouping radius for a candidate
//! cluster of size `m` is `10 * eig_cluster_tol^(1/m) * (1 + |mu|)` (plain
//! `eig_cluster_tol * (1 + |mu|)` for `m = 1`). A candidate cluster is only
//! accepted when the matrix restricted to its invariant subspace, shifted by
//! the cluster mean, is numerically nilpotent; otherwise it is split again
//! with a smaller radius.
//!
//! Inside an accepted cluster the Weyr sequence `dim ker (M - mu)^k` fixes
//! the block sizes, and Jordan chains are built top-down: the head `x_d` of
//! each new chain is taken from `ker (M - mu)^d` orthogonal to
//! `ker (M - mu)^(d-1)` and to the chain vectors already in use, and the
//! chain descends by `x_(k-1) = (M - mu) x_k`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::{Float, Zero};

use crate::error::{Error, Result};
use crate::linalg::{self, orthonormal_span, schur, svd, Tolerances};
use crate::matrix::{c64, dot, Matrix, C64};

/// One Jordan block with its chain `x_1, ..., x_d` (`x_1` is an eigenvector).
#[derive(Debug, Clone)]
pub struct JordanBlockSpec {
    pub eigenvalue: C64,
    pub dimension: usize,
    pub chain: Vec<Vec<C64>>,
}

/// An accepted eigenvalue cluster and its Segre characteristic.
#[derive(Debug, Clone)]
pub struct EigenCluster {
    pub eigenvalue: C64,
    pub multiplicity: usize,
    /// Block sizes in descending order.
    pub block_sizes: Vec<usize>,
    /// `dim ker (M - mu)^k` for `k = 1..=multiplicity`.
    pub weyr: Vec<usize>,
    /// Index of the conjugate cluster for real input with nonreal `mu`.
    pub conjugate: Option<usize>,
}

impl EigenCluster {
    pub fn is_real(&self) -> bool {
        self.eigenvalue.im == 0.0
    }

    /// Number of blocks of each dimension.
    pub fn block_counts(&self) -> BTreeMap<usize, usize> {
        let mut counts = BTreeMap::new();
        for &d in &self.block_sizes {
            *counts.entry(d).or_insert(0) += 1;
        }
        counts
    }
}

#[derive(Debug, Clone)]
pub struct JordanStructure {
    pub clusters: Vec<EigenCluster>,
    /// Blocks in the column order of `transform`.
    pub blocks: Vec<JordanBlockSpec>,
    /// `P` with `M P = P J`.
    pub transform: Matrix,
    /// Block-diagonal Jordan form `J`.
    pub normal_form: Matrix,
    /// Whether the input was treated as a real matrix.
    pub real_input: bool,
}

impl JordanStructure {
    /// `||M P - P J||_F / (||M||_F ||P||_F)`.
    pub fn residual(&self, m: &Matrix) -> f64 {
        let lhs = m.matmul(&self.transform);
        let rhs = self.transform.matmul(&self.normal_form);
        let denom = m.frobenius_norm().max(f64::MIN_POSITIVE) * self.transform.frobenius_norm();
        (&lhs - &rhs).frobenius_norm() / denom
    }

    pub fn condition_number(&self) -> f64 {
        linalg::condition_number(&self.transform)
    }

    pub fn cluster_at(&self, lambda: C64) -> Option<&EigenCluster> {
        self.clusters
            .iter()
            .min_by(|a, b| (a.eigenvalue - lambda).norm().total_cmp(&(b.eigenvalue - lambda).norm()))
    }
}

/// Orthonormal bases of `ker B^k` for `k = 1..=max_power`, using
/// `ker B^k = ker((I - Q Q^*) B)` with `Q` a basis of `ker B^(k-1)`. Each
/// step is a single product with `B`, so roundoff is not amplified by powers
/// of a non-normal `B`. Singular values at or below `cut` count as zero.
fn nested_kernels(b: &Matrix, cut: f64, max_power: usize) -> Vec<Vec<Vec<C64>>> {
    let n = b.rows();
    let mut out: Vec<Vec<Vec<C64>>> = Vec::with_capacity(max_power);
    let mut q: Vec<Vec<C64>> = Vec::new();
    while out.len() < max_power {
        if q.len() == n || (out.len() >= 2 && out[out.len() - 2].len() == q.len()) {
            out.push(q.clone());
            continue;
        }
        let mut c = b.clone();
        for j in 0..n {
            let col = c.column(j);
            let mut r = col.clone();
            for v in &q {
                let a = dot(v, &col);
                for (x, y) in r.iter_mut().zip(v) {
                    *x -= a * y;
                }
            }
            c.set_column(j, &r);
        }
        let s = svd(&c);
        let kernel: Vec<Vec<C64>> = (0..n).filter(|&j| s.singular_values[j] <= cut).map(|j| s.v.column(j)).collect();
        // Kernels of powers are nested; clamp against roundoff.
        if kernel.len() >= q.len() {
            q = kernel;
        }
        out.push(q.clone());
    }
    out
}

/// `(dim ker (lambda I - M)^k)` for `k = 1..=n`.
pub fn weyr_sequence(m: &Matrix, lambda: C64, tol: &Tolerances) -> Result<Vec<usize>> {
    let n = m.ensure_square()?;
    let b = m.shift(lambda);
    let cut = tol.rank_tol * linalg::opnorm(m).max(linalg::opnorm(&b));
    Ok(nested_kernels(&b, cut, n).iter().map(Vec::len).collect())
}

/// Number of Jordan blocks of each dimension at `lambda`, from the Weyr
/// sequence: `#blocks of size >= k = w_k - w_(k-1)`.
pub fn block_counts(m: &Matrix, lambda: C64, tol: &Tolerances) -> Result<BTreeMap<usize, usize>> {
    let w = weyr_sequence(m, lambda, tol)?;
    Ok(counts_from_weyr(&w))
}

pub(crate) fn counts_from_weyr(w: &[usize]) -> BTreeMap<usize, usize> {
    let at = |k: usize| if k == 0 { 0 } else { w.get(k - 1).copied().unwrap_or(*w.last().unwrap_or(&0)) };
    let ge = |k: usize| at(k).saturating_sub(at(k - 1));
    let mut counts = BTreeMap::new();
    for d in 1..=w.len() {
        let c = ge(d).saturating_sub(ge(d + 1));
        if c > 0 {
            counts.insert(d, c);
        }
    }
    counts
}

fn block_sizes_from_counts(counts: &BTreeMap<usize, usize>) -> Vec<usize> {
    let mut sizes = Vec::new();
    for (&d, &c) in counts.iter().rev() {
        sizes.extend(core::iter::repeat(d).take(c));
    }
    sizes
}

fn cluster_radius(size: usize, center: C64, tol: &Tolerances, shrink: f64) -> f64 {
    let base = tol.eig_cluster_tol * (1.0 + center.norm());
    if size <= 1 {
        return base;
    }
    let wide = 10.0 * tol.eig_cluster_tol.powf(1.0 / size as f64) * (1.0 + center.norm()) * shrink;
    wide.max(base)
}

fn mean(values: &[C64], members: &[usize]) -> C64 {
    members.iter().map(|&i| values[i]).sum::<C64>() / members.len() as f64
}

/// Splits `members` into single-linkage components whose radius matches
/// their own size, refining top-down until every group is stable.
fn group(values: &[C64], members: &[usize], tol: &Tolerances, shrink: f64) -> Vec<Vec<usize>> {
    let mut pending = vec![members.to_vec()];
    let mut groups = Vec::new();
    while let Some(g) = pending.pop() {
        if g.len() <= 1 {
            groups.push(g);
            continue;
        }
        let r = cluster_radius(g.len(), mean(values, &g), tol, shrink);
        let comps = components(values, &g, r);
        if comps.len() == 1 {
            groups.push(g);
        } else {
            pending.extend(comps);
        }
    }
    groups.sort_unstable();
    groups
}

fn components(values: &[C64], members: &[usize], r: f64) -> Vec<Vec<usize>> {
    let mut label: Vec<usize> = (0..members.len()).collect();
    for a in 0..members.len() {
        for b in (a + 1)..members.len() {
            if (values[members[a]] - values[members[b]]).norm() <= r && label[a] != label[b] {
                let (from, to) = (label[b], label[a]);
                label.iter_mut().filter(|l| **l == from).for_each(|l| *l = to);
            }
        }
    }
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &i) in members.iter().enumerate() {
        out.entry(label[k]).or_default().push(i);
    }
    out.into_values().collect()
}

/// Orthonormal basis of the invariant subspace for the Schur diagonal
/// entries in `members`.
fn invariant_basis(base: &linalg::Schur, members: &[usize]) -> Vec<Vec<C64>> {
    let n = base.t.rows();
    let mut s = base.clone();
    let mut select = vec![false; n];
    for &i in members {
        select[i] = true;
    }
    let m = s.reorder_leading(&select);
    (0..m).map(|j| s.q.column(j)).collect()
}

/// Real orthonormal basis of a subspace that is closed under conjugation.
fn realify(basis: &[Vec<C64>], tol: &Tolerances) -> Option<Vec<Vec<C64>>> {
    let m = basis.len();
    let mut parts = Vec::with_capacity(2 * m);
    for v in basis {
        parts.push(v.iter().map(|z| c64(z.re, 0.0)).collect::<Vec<_>>());
        parts.push(v.iter().map(|z| c64(z.im, 0.0)).collect::<Vec<_>>());
    }
    let a = Matrix::from_columns(&parts);
    let s = svd(&a);
    // A real subspace of dimension m has exactly m significant directions.
    if s.singular_values.len() > m && s.singular_values[m] > 1e-6_f64.max(tol.rank_tol) * s.largest() {
        return None;
    }
    Some(s.leading_left(m).into_iter().map(|v| v.into_iter().map(|z| c64(z.re, 0.0)).collect()).collect())
}

/// `G^H M G - mu I`.
fn restricted_shift(m: &Matrix, basis: &[Vec<C64>], mu: C64) -> Matrix {
    let g = Matrix::from_columns(basis);
    g.adjoint().matmul(m).matmul(&g).shift(mu)
}

struct RestrictedWeyr {
    weyr: Vec<usize>,
    kernels: Vec<Vec<Vec<C64>>>,
}

/// Weyr sequence and kernel bases of the powers of a small, supposedly
/// nilpotent matrix `x`.
fn restricted_weyr(x: &Matrix, m_norm: f64, tol: &Tolerances) -> RestrictedWeyr {
    let cut = tol.rank_tol * m_norm.max(linalg::opnorm(x));
    let kernels = nested_kernels(x, cut, x.rows());
    RestrictedWeyr { weyr: kernels.iter().map(Vec::len).collect(), kernels }
}

struct AcceptedCluster {
    mu: C64,
    members: Vec<usize>,
}

/// Splits `members` until every group passes the nilpotency check.
fn resolve_clusters(
    m: &Matrix,
    base: &linalg::Schur,
    values: &[C64],
    members: &[usize],
    m_norm: f64,
    tol: &Tolerances,
    shrink: f64,
    out: &mut Vec<AcceptedCluster>,
) -> Result<()> {
    for grp in group(values, members, tol, shrink) {
        let mu = mean(values, &grp);
        if grp.len() == 1 {
            out.push(AcceptedCluster { mu, members: grp });
            continue;
        }
        let basis = invariant_basis(base, &grp);
        let x = restricted_shift(m, &basis, mu);
        let w = restricted_weyr(&x, m_norm, tol);
        if *w.weyr.last().unwrap() == grp.len() {
            out.push(AcceptedCluster { mu, members: grp });
            continue;
        }
        let at_floor = 10.0 * tol.eig_cluster_tol.sqrt() * shrink <= tol.eig_cluster_tol;
        if at_floor {
            return Err(Error::StructureAmbiguous {
                cluster: mu,
                detail: format!(
                    "{} eigenvalues within the clustering radius are neither separated nor a single defective eigenvalue",
                    grp.len()
                ),
            });
        }
        let next = shrink * 1e-2;
        resolve_clusters(m, base, values, &grp, m_norm, tol, next, out)?;
    }
    Ok(())
}

/// Accepted clusters of `m` with conjugate pairing for real input.
fn spectral_clusters(m: &Matrix, real: bool, tol: &Tolerances) -> Result<(linalg::Schur, Vec<AcceptedCluster>)> {
    let base = schur(m)?;
    let values = base.eigenvalues();
    let m_norm = linalg::opnorm(m);
    let all: Vec<usize> = (0..values.len()).collect();
    let mut accepted = Vec::new();
    resolve_clusters(m, &base, &values, &all, m_norm, tol, 1.0, &mut accepted)?;

    // Separation: distinct clusters must be further apart than twice the
    // base radius.
    for a in 0..accepted.len() {
        for b in (a + 1)..accepted.len() {
            let d = (accepted[a].mu - accepted[b].mu).norm();
            let r = tol.eig_cluster_tol * (1.0 + accepted[a].mu.norm().max(accepted[b].mu.norm()));
            if d <= 2.0 * r {
                return Err(Error::StructureAmbiguous {
                    cluster: accepted[a].mu,
                    detail: format!("clusters at distance {d:e} are not separated"),
                });
            }
        }
    }

    if real {
        for c in accepted.iter_mut() {
            let r = cluster_radius(c.members.len(), c.mu, tol, 1.0);
            if c.mu.im.abs() <= r {
                c.mu = c64(c.mu.re, 0.0);
            }
        }
    }
    accepted.sort_by(|a, b| (a.mu.re, -a.mu.im).partial_cmp(&(b.mu.re, -b.mu.im)).unwrap_or(core::cmp::Ordering::Equal));
    Ok((base, accepted))
}

/// Jordan chains of the nilpotent `x` (coordinates in the restricted
/// basis), largest blocks first. Each chain is returned as `x_1, ..., x_d`.
fn restricted_chains(x: &Matrix, w: &RestrictedWeyr, tol: &Tolerances) -> Result<Vec<Vec<Vec<C64>>>> {
    let m = x.rows();
    let counts = counts_from_weyr(&w.weyr);
    let max_d = counts.keys().copied().max().unwrap_or(0);
    // used[k] holds chain vectors already placed at level k (1-based).
    let mut used: Vec<Vec<Vec<C64>>> = vec![Vec::new(); max_d + 2];
    let mut chains = Vec::new();
    for d in (1..=max_d).rev() {
        let new = counts.get(&d).copied().unwrap_or(0);
        if new == 0 {
            continue;
        }
        let mut avoid: Vec<Vec<C64>> = if d >= 2 { w.kernels[d - 2].clone() } else { Vec::new() };
        avoid.extend(used[d].iter().cloned());
        let avoid = orthonormal_span(&avoid, tol.rank_tol.max(1e-12));
        // Project ker X^d onto the orthogonal complement of `avoid`.
        let projected: Vec<Vec<C64>> = w.kernels[d - 1]
            .iter()
            .map(|v| {
                let mut p = v.clone();
                for a in &avoid {
                    let coef = crate::matrix::dot(a, &p);
                    for (pi, ai) in p.iter_mut().zip(a) {
                        *pi -= coef * ai;
                    }
                }
                p
            })
            .collect();
        if projected.is_empty() {
            return Err(Error::StructureAmbiguous { cluster: C64::zero(), detail: "empty kernel level".into() });
        }
        let s = svd(&Matrix::from_columns(&projected));
        if s.singular_values.len() < new || s.singular_values[new - 1] <= 1e-8 * s.largest().max(1.0) {
            return Err(Error::StructureAmbiguous {
                cluster: C64::zero(),
                detail: format!("cannot find {new} chain heads of length {d}"),
            });
        }
        for head in s.leading_left(new) {
            let mut chain_top_down = vec![head];
            for _ in 1..d {
                let next = x.mul_vec(chain_top_down.last().unwrap());
                chain_top_down.push(next);
            }
            // chain_top_down[j] sits at level d - j.
            for (j, v) in chain_top_down.iter().enumerate() {
                let level = d - j;
                if level < d {
                    used[level].push(v.clone());
                }
            }
            chain_top_down.reverse();
            chains.push(chain_top_down);
        }
    }
    let total: usize = chains.iter().map(Vec::len).sum();
    if total != m {
        return Err(Error::StructureAmbiguous {
            cluster: C64::zero(),
            detail: format!("chains cover {total} of {m} dimensions"),
        });
    }
    Ok(chains)
}

fn lift(basis: &[Vec<C64>], coords: &[C64]) -> Vec<C64> {
    let n = basis[0].len();
    let mut v = vec![C64::zero(); n];
    for (b, &c) in basis.iter().zip(coords) {
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi += c * bi;
        }
    }
    v
}

/// Full Jordan decomposition. Real input (within `positivity_tol`) gets
/// real chains for real eigenvalues and conjugate chains for conjugate
/// eigenvalue pairs.
pub fn jordan_decompose(m: &Matrix, tol: &Tolerances) -> Result<JordanStructure> {
    let n = m.ensure_square()?;
    let real = m.is_real(tol.positivity_tol);
    let work = if real { m.real_part() } else { m.clone() };
    let (base, accepted) = spectral_clusters(&work, real, tol)?;
    let m_norm = linalg::opnorm(&work);

    let mut clusters: Vec<EigenCluster> = Vec::with_capacity(accepted.len());
    let mut cluster_chains: Vec<Option<Vec<Vec<Vec<C64>>>>> = vec![None; accepted.len()];
    let mut handled = vec![false; accepted.len()];

    for idx in 0..accepted.len() {
        let c = &accepted[idx];
        let multiplicity = c.members.len();
        clusters.push(EigenCluster {
            eigenvalue: c.mu,
            multiplicity,
            block_sizes: Vec::new(),
            weyr: Vec::new(),
            conjugate: None,
        });
    }

    for idx in 0..accepted.len() {
        if handled[idx] {
            continue;
        }
        let c = &accepted[idx];
        let mu = c.mu;
        let mut basis = invariant_basis(&base, &c.members);
        if real && mu.im == 0.0 {
            basis = realify(&basis, tol).ok_or_else(|| Error::StructureAmbiguous {
                cluster: mu,
                detail: "invariant subspace of a real eigenvalue is not real".into(),
            })?;
        }
        if real && mu.im < 0.0 {
            // Handled through the partner with positive imaginary part.
            continue;
        }
        let x = restricted_shift(&work, &basis, mu);
        let w = restricted_weyr(&x, m_norm, tol);
        let coords = restricted_chains(&x, &w, tol).map_err(|e| match e {
            Error::StructureAmbiguous { detail, .. } => Error::StructureAmbiguous { cluster: mu, detail },
            other => other,
        })?;
        let chains: Vec<Vec<Vec<C64>>> =
            coords.iter().map(|ch| ch.iter().map(|v| lift(&basis, v)).collect()).collect();
        let sizes = block_sizes_from_counts(&counts_from_weyr(&w.weyr));
        clusters[idx].block_sizes = sizes.clone();
        clusters[idx].weyr = w.weyr.clone();
        handled[idx] = true;

        if real && mu.im > 0.0 {
            let partner = (0..accepted.len())
                .filter(|&j| !handled[j] && accepted[j].members.len() == c.members.len() && accepted[j].mu.im < 0.0)
                .min_by(|&a, &b| {
                    (accepted[a].mu - mu.conj()).norm().total_cmp(&(accepted[b].mu - mu.conj()).norm())
                })
                .ok_or_else(|| Error::StructureAmbiguous {
                    cluster: mu,
                    detail: "no conjugate partner cluster for a real matrix".into(),
                })?;
            let r = cluster_radius(c.members.len(), mu, tol, 1.0);
            if (accepted[partner].mu - mu.conj()).norm() > r {
                return Err(Error::StructureAmbiguous {
                    cluster: mu,
                    detail: "conjugate partner cluster too far from the conjugate eigenvalue".into(),
                });
            }
            clusters[partner].eigenvalue = mu.conj();
            clusters[partner].block_sizes = sizes;
            clusters[partner].weyr = w.weyr.clone();
            clusters[partner].conjugate = Some(idx);
            clusters[idx].conjugate = Some(partner);
            let conj_chains = chains.iter().map(|ch| ch.iter().map(|v| v.iter().map(|z| z.conj()).collect()).collect()).collect();
            cluster_chains[partner] = Some(conj_chains);
            handled[partner] = true;
        }
        cluster_chains[idx] = Some(chains);
    }

    let mut blocks = Vec::new();
    let mut columns: Vec<Vec<C64>> = Vec::with_capacity(n);
    for (idx, chains) in cluster_chains.into_iter().enumerate() {
        let chains = chains.ok_or_else(|| Error::StructureAmbiguous {
            cluster: clusters[idx].eigenvalue,
            detail: "cluster left without chains".into(),
        })?;
        for chain in chains {
            columns.extend(chain.iter().cloned());
            blocks.push(JordanBlockSpec { eigenvalue: clusters[idx].eigenvalue, dimension: chain.len(), chain });
        }
    }
    let transform = Matrix::from_columns(&columns);
    let normal_form =
        Matrix::block_diag(&blocks.iter().map(|b| Matrix::jordan_block(b.eigenvalue, b.dimension)).collect::<Vec<_>>());
    Ok(JordanStructure { clusters, blocks, transform, normal_form, real_input: real })
}
