//! Positive embeddability of entrywise nonnegative matrices.
//!
//! A positive matrix `T` is positively embeddable when `T = e^A` for a
//! Metzler generator `A` (nonnegative off the diagonal), so that every
//! `e^{tA}`, `t >= 0`, is positive as well. For `n = 2` this happens exactly
//! when `det T > 0`; for unipotent upper-triangular `3 x 3` matrices exactly
//! when `c >= ab/2`. In general only necessary conditions are known, and the
//! branch search below may answer UNDECIDED.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::jordan::jordan_decompose;
use crate::linalg::{self, classify_eigenvalue, expm, EigenClass, Tolerances};
use crate::matrix::{c64, Matrix, C64};
use crate::real_embed;
use crate::report::{Condition, ConditionStatus, Construction, DecisionReport, EmbeddingCertificate, Verdict};

pub const CITE_N1: &str = "diagonal entries of a positive semigroup stay strictly positive for all t >= 0";
pub const CITE_N2: &str = "a finite matrix embeddable into a semigroup is invertible";
pub const CITE_N3: &str =
    "zero entries persist along a positive semigroup, and T = T(1/2)^2 then forces a transitively closed pattern";
pub const CITE_N4: &str = "a positive analytic semigroup is, at t > 0, either strictly positive or reducible";
pub const CITE_N5: &str = "a positive 2x2 matrix is positively embeddable iff det T > 0";
pub const CITE_UNIPOTENT: &str =
    "a unipotent upper-triangular 3x3 matrix (a, b, c) is positively embeddable iff c >= ab/2";
pub const CITE_SEARCH: &str = "a Metzler logarithm whose flow stays positive certifies positive embeddability";
pub const CITE_SCALING: &str = "e^A = T iff e^(A + log(r) I) = r T, and adding a multiple of I keeps A Metzler";

/// The dyadic verification grid `{k/16 : 1 <= k <= 32}`.
pub fn verification_grid() -> Vec<f64> {
    (1..=32).map(|k| k as f64 / 16.0).collect()
}

/// Threshold under which an entry counts as zero: `positivity_tol` scaled by
/// the largest entry when that exceeds one.
fn zero_cut(t: &Matrix, tol: &Tolerances) -> f64 {
    tol.positivity_tol * t.max_abs().max(1.0)
}

/// Nonzero pattern of a matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroPattern {
    pub n: usize,
    pub nonzero: BTreeSet<(usize, usize)>,
}

impl ZeroPattern {
    pub fn from_matrix(t: &Matrix, tol: &Tolerances) -> Result<Self> {
        let n = t.ensure_square()?;
        let cut = zero_cut(t, tol);
        let mut nonzero = BTreeSet::new();
        for i in 0..n {
            for j in 0..n {
                if t[(i, j)].re > cut {
                    nonzero.insert((i, j));
                }
            }
        }
        Ok(Self { n, nonzero })
    }

    pub fn is_nonzero(&self, i: usize, j: usize) -> bool {
        self.nonzero.contains(&(i, j))
    }

    /// First triple with `(i,k)` and `(k,j)` nonzero but `(i,j)` zero.
    pub fn transitivity_gap(&self) -> Option<(usize, usize, usize)> {
        for &(i, k) in &self.nonzero {
            for j in 0..self.n {
                if self.is_nonzero(k, j) && !self.is_nonzero(i, j) {
                    return Some((i, k, j));
                }
            }
        }
        None
    }

    pub fn is_full(&self) -> bool {
        self.nonzero.len() == self.n * self.n
    }

    /// `reach[i][j]` iff there is a path `i -> ... -> j` (including `i = j`).
    fn reachability(&self) -> Vec<Vec<bool>> {
        let n = self.n;
        let mut r = vec![vec![false; n]; n];
        for i in 0..n {
            r[i][i] = true;
        }
        for &(i, j) in &self.nonzero {
            r[i][j] = true;
        }
        for k in 0..n {
            for i in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }
}

fn require_positive(t: &Matrix, tol: &Tolerances) -> Result<usize> {
    let n = t.ensure_square()?;
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    if !t.is_finite() {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    if !t.is_real(tol.positivity_tol) {
        return Err(Error::Domain(format!("matrix is not real (max |Im| = {:e})", t.max_abs_imag())));
    }
    let min = t.min_real_entry();
    if min < -zero_cut(t, tol) {
        return Err(Error::NotPositive { min_entry: min });
    }
    Ok(n)
}

fn det2(t: &Matrix) -> f64 {
    t[(0, 0)].re * t[(1, 1)].re - t[(0, 1)].re * t[(1, 0)].re
}

/// Evaluates the necessary conditions N1 to N5.
pub fn necessary_battery(t: &Matrix, tol: &Tolerances) -> Result<DecisionReport> {
    let n = require_positive(t, tol)?;
    let t = t.real_part();
    let pattern = ZeroPattern::from_matrix(&t, tol)?;
    let cut = zero_cut(&t, tol);
    let mut conditions = Vec::with_capacity(5);

    let n1 = match (0..n).find(|&i| t[(i, i)].re <= cut) {
        None => Condition::new("N1", CITE_N1, ConditionStatus::Satisfied, "all diagonal entries positive".into()),
        Some(i) => Condition::new(
            "N1",
            CITE_N1,
            ConditionStatus::Violated,
            format!("diagonal entry ({}, {}) is zero ({:e})", i + 1, i + 1, t[(i, i)].re),
        ),
    };
    conditions.push(n1);

    let rank = linalg::rank(&t, tol);
    conditions.push(if rank == n {
        Condition::new("N2", CITE_N2, ConditionStatus::Satisfied, "invertible".into())
    } else {
        Condition::new("N2", CITE_N2, ConditionStatus::Violated, format!("numerical rank {rank} < {n}"))
    });

    // Diagonal entries are part of the pattern for N3 even when N1 failed.
    let mut closed = pattern.clone();
    for i in 0..n {
        closed.nonzero.insert((i, i));
    }
    conditions.push(match closed.transitivity_gap() {
        None => Condition::new("N3", CITE_N3, ConditionStatus::Satisfied, "nonzero pattern is transitive".into()),
        Some((i, k, j)) => Condition::new(
            "N3",
            CITE_N3,
            ConditionStatus::Violated,
            format!(
                "entries ({}, {}) and ({}, {}) are nonzero but ({}, {}) is zero",
                i + 1,
                k + 1,
                k + 1,
                j + 1,
                i + 1,
                j + 1
            ),
        ),
    });

    let red = components_of(&pattern);
    conditions.push(if pattern.is_full() {
        Condition::new("N4", CITE_N4, ConditionStatus::Satisfied, "strictly positive".into())
    } else if red.len() > 1 {
        Condition::new("N4", CITE_N4, ConditionStatus::Satisfied, format!("reducible ({} components)", red.len()))
    } else {
        Condition::new(
            "N4",
            CITE_N4,
            ConditionStatus::Violated,
            "irreducible but not strictly positive".into(),
        )
    });

    conditions.push(if n == 2 { det_condition(&t, tol) } else {
        Condition::new("N5", CITE_N5, ConditionStatus::NotApplicable, format!("n = {n}"))
    });

    let verdict = if conditions.iter().any(Condition::violated) { Verdict::NotEmbeddable } else { Verdict::Undecided };
    Ok(DecisionReport { verdict, conditions, negative_blocks: Vec::new(), jordan_condition: None })
}

fn det_band(t: &Matrix, tol: &Tolerances) -> f64 {
    let norm = linalg::opnorm(t);
    tol.positivity_tol * norm * norm
}

fn det_condition(t: &Matrix, tol: &Tolerances) -> Condition {
    let det = det2(t);
    let band = det_band(t, tol);
    let (status, detail) = if det > band {
        (ConditionStatus::Satisfied, format!("det = {det:e} > 0"))
    } else if det < -band {
        (ConditionStatus::Violated, format!("det = {det:e} < 0"))
    } else {
        (ConditionStatus::Boundary, format!("det = {det:e} within {band:e} of 0"))
    };
    Condition::new("N5", CITE_N5, status, detail)
}

/// Strongly connected components and reducing coordinate subspaces of the
/// nonzero pattern (indices are 0-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reducibility {
    /// Components ordered by their smallest index.
    pub components: Vec<Vec<usize>>,
    pub irreducible: bool,
    /// Index sets `J` with `T span{e_j : j in J} ⊂ span{e_j : j in J}`,
    /// proper and nonempty, by size and then lexicographically.
    pub reducing_subspaces: Vec<Vec<usize>>,
}

fn components_of(p: &ZeroPattern) -> Vec<Vec<usize>> {
    let reach = p.reachability();
    let mut seen = vec![false; p.n];
    let mut out = Vec::new();
    for i in 0..p.n {
        if seen[i] {
            continue;
        }
        let comp: Vec<usize> = (0..p.n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &comp {
            seen[j] = true;
        }
        out.push(comp);
    }
    out
}

/// Largest number of components for which every closed union is listed;
/// beyond it only the closures of single components are reported.
const ENUMERATION_LIMIT: usize = 16;

pub fn reducibility_components(t: &Matrix, tol: &Tolerances) -> Result<Reducibility> {
    let pattern = ZeroPattern::from_matrix(&t.real_part(), tol)?;
    let n = pattern.n;
    let components = components_of(&pattern);
    let reach = pattern.reachability();
    let c = components.len();
    // Component a must accompany component b when an edge runs a -> b:
    // T e_j has support on the rows i with (i, j) nonzero.
    let needs = |a: usize, b: usize| reach[components[a][0]][components[b][0]];

    let mut sets: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
    let push = |members: &[bool], sets: &mut BTreeSet<(usize, Vec<usize>)>| {
        let idx: Vec<usize> =
            (0..c).filter(|&k| members[k]).flat_map(|k| components[k].iter().copied()).collect::<BTreeSet<_>>().into_iter().collect();
        if !idx.is_empty() && idx.len() < n {
            sets.insert((idx.len(), idx));
        }
    };
    if c <= ENUMERATION_LIMIT {
        for mask in 1u32..(1u32 << c) {
            let members: Vec<bool> = (0..c).map(|k| mask & (1 << k) != 0).collect();
            let closed = (0..c).all(|b| !members[b] || (0..c).all(|a| !needs(a, b) || members[a]));
            if closed {
                push(&members, &mut sets);
            }
        }
    } else {
        for b in 0..c {
            let members: Vec<bool> = (0..c).map(|a| needs(a, b)).collect();
            push(&members, &mut sets);
        }
    }
    Ok(Reducibility {
        irreducible: c == 1,
        components,
        reducing_subspaces: sets.into_iter().map(|(_, s)| s).collect(),
    })
}

/// Outcome of a positive-embeddability decision.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveDecision {
    pub verdict: Verdict,
    pub reasons: Vec<Condition>,
    pub certificate: Option<EmbeddingCertificate>,
}

impl PositiveDecision {
    fn from_battery(report: DecisionReport) -> Self {
        Self { verdict: report.verdict, reasons: report.conditions, certificate: None }
    }

    pub fn violations(&self) -> impl Iterator<Item = &Condition> {
        self.reasons.iter().filter(|c| c.violated())
    }
}

fn relative_residual(a: &Matrix, t: &Matrix) -> f64 {
    linalg::opnorm(&(&expm(a) - t)) / linalg::opnorm(t).max(f64::MIN_POSITIVE)
}

fn certify(generator: Matrix, t: &Matrix, branch_log: Vec<(C64, i64)>, construction: Construction, tol: &Tolerances) -> Result<EmbeddingCertificate> {
    let residual = relative_residual(&generator, t);
    if !(residual <= tol.verify_tol) {
        return Err(Error::Verification { residual, tolerance: tol.verify_tol });
    }
    Ok(EmbeddingCertificate { generator, residual, branch_log, construction })
}

fn require_2x2(t: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    if t.rows() != 2 || t.cols() != 2 {
        return Err(Error::Dimension { expected: 2, found: t.rows().max(t.cols()) });
    }
    require_positive(t, tol)?;
    Ok(t.real_part())
}

/// Exact decision for `2 x 2` positive matrices: embeddable iff `det T > 0`.
pub fn decide_positive_2x2(t: &Matrix, tol: &Tolerances) -> Result<PositiveDecision> {
    let t = require_2x2(t, tol)?;
    let det = det_condition(&t, tol);
    let mut reasons = Vec::new();
    let verdict = match det.status {
        ConditionStatus::Satisfied => Verdict::Embeddable,
        ConditionStatus::Boundary => {
            reasons.push(Condition::new(
                "N2",
                CITE_N2,
                ConditionStatus::Violated,
                "determinant vanishes within tolerance".into(),
            ));
            Verdict::NotEmbeddable
        }
        _ => Verdict::NotEmbeddable,
    };
    let lambda = eigen2(&t);
    reasons.insert(
        0,
        Condition::new(
            "EIGENVALUES",
            "for positive 2x2 matrices det T > 0 iff both (real) eigenvalues are positive",
            if lambda.1 > 0.0 { ConditionStatus::Satisfied } else { ConditionStatus::Violated },
            format!("eigenvalues {:e}, {:e}", lambda.0, lambda.1),
        ),
    );
    if verdict == Verdict::NotEmbeddable {
        // The eigenvalue test is only informative; the determinant decides.
        reasons[0].status = ConditionStatus::NotApplicable;
    }
    reasons.insert(0, det);
    let certificate = if verdict == Verdict::Embeddable { Some(construct_positive_2x2(&t, tol)?) } else { None };
    Ok(PositiveDecision { verdict, reasons, certificate })
}

/// Eigenvalues `(lambda, mu)`, `lambda >= mu`, of a real `2 x 2` matrix with
/// `bc >= 0`, with `mu` computed from the determinant.
fn eigen2(t: &Matrix) -> (f64, f64, f64) {
    let (a, b, c, d) = (t[(0, 0)].re, t[(0, 1)].re, t[(1, 0)].re, t[(1, 1)].re);
    let m = 0.5 * (a + d);
    let h = (0.25 * (a - d) * (a - d) + b * c).max(0.0).sqrt();
    let lambda = m + h;
    let mu = if lambda > 0.0 { det2(t) / lambda } else { m - h };
    (lambda, mu, h)
}

/// Metzler generator of a positively embeddable `2 x 2` matrix, written as
/// `A = c0 I + c1 T` with `c1 = (log lambda - log mu) / (lambda - mu)`.
pub fn construct_positive_2x2(t: &Matrix, tol: &Tolerances) -> Result<EmbeddingCertificate> {
    let t = require_2x2(t, tol)?;
    if !(det2(&t) > det_band(&t, tol)) {
        return Err(Error::NotEmbeddable(format!("det = {:e} is not positive", det2(&t))));
    }
    let (lambda, mu, h) = eigen2(&t);
    let c1 = if h > 0.0 { (2.0 * h / mu).ln_1p() / (2.0 * h) } else { 1.0 / mu };
    let c0 = lambda.ln() - c1 * lambda;
    let mut a = t.scale_real(c1);
    for i in 0..2 {
        a[(i, i)] += c64(c0, 0.0);
    }
    certify(a, &t, vec![(c64(lambda, 0.0), 0), (c64(mu, 0.0), 0)], Construction::Metzler2x2, tol)
}

fn check_abc(a: f64, b: f64, c: f64) -> Result<()> {
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} = {v} must be a finite nonnegative number")));
        }
    }
    Ok(())
}

/// `[[1, a, c], [0, 1, b], [0, 0, 1]]`.
pub fn unipotent3(a: f64, b: f64, c: f64) -> Matrix {
    Matrix::from_real_rows(&[[1.0, a, c], [0.0, 1.0, b], [0.0, 0.0, 1.0]])
}

fn unipotent_condition(a: f64, b: f64, c: f64, tol: &Tolerances) -> Condition {
    let thr = 0.5 * a * b;
    let status = if (c - thr).abs() <= tol.positivity_tol {
        ConditionStatus::Boundary
    } else if c > thr {
        ConditionStatus::Satisfied
    } else {
        ConditionStatus::Violated
    };
    Condition::new("UNIPOTENT3", CITE_UNIPOTENT, status, format!("c = {c}, ab/2 = {thr}"))
}

pub fn decide_unipotent3(a: f64, b: f64, c: f64, tol: &Tolerances) -> Result<PositiveDecision> {
    check_abc(a, b, c)?;
    let cond = unipotent_condition(a, b, c, tol);
    if cond.violated() {
        return Ok(PositiveDecision { verdict: Verdict::NotEmbeddable, reasons: vec![cond], certificate: None });
    }
    let cert = construct_unipotent3(a, b, c, tol)?;
    Ok(PositiveDecision { verdict: Verdict::Embeddable, reasons: vec![cond], certificate: Some(cert) })
}

/// Generator `[[0, a, gamma], [0, 0, b], [0, 0, 0]]`, `gamma = c - ab/2`.
pub fn construct_unipotent3(a: f64, b: f64, c: f64, tol: &Tolerances) -> Result<EmbeddingCertificate> {
    check_abc(a, b, c)?;
    let thr = 0.5 * a * b;
    if c < thr - tol.positivity_tol {
        return Err(Error::Infeasible(format!("c = {c} < ab/2 = {thr}")));
    }
    let gamma = (c - thr).max(0.0);
    let g = Matrix::from_real_rows(&[[0.0, a, gamma], [0.0, 0.0, b], [0.0, 0.0, 0.0]]);
    certify(g, &unipotent3(a, b, c), vec![(c64(1.0, 0.0), 0)], Construction::Unipotent3, tol)
}

/// Positive upper-triangular square root `[[1, a/2, g], [0, 1, b/2], [0, 0, 1]]`
/// with `g = (c - ab/4)/2`, or `None` when `c < ab/4`.
pub fn positive_sqrt_unipotent3(a: f64, b: f64, c: f64, tol: &Tolerances) -> Option<Matrix> {
    check_abc(a, b, c).ok()?;
    let thr = 0.25 * a * b;
    if c < thr - tol.positivity_tol {
        return None;
    }
    Some(unipotent3(0.5 * a, 0.5 * b, (0.5 * (c - thr)).max(0.0)))
}

/// Flow statistics of a certificate over a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowCheck {
    /// Smallest entry of `e^{tA}` over the grid.
    pub min_entry: f64,
    /// Largest `|e^{tA}_ij|` over the grid at positions that are zero in `e^A`.
    pub max_zero_entry: f64,
    /// Largest leak of `e^{tA}` out of the reducing subspaces of `e^A`.
    pub max_reducing_leak: f64,
    pub pattern_persists: bool,
    pub subspaces_invariant: bool,
}

pub fn positive_flow_check(cert: &EmbeddingCertificate, grid: &[f64], tol: &Tolerances) -> Result<FlowCheck> {
    let a = &cert.generator;
    let n = a.ensure_square()?;
    if let Some(t) = grid.iter().find(|t| !(**t >= 0.0) || !t.is_finite()) {
        return Err(Error::Domain(format!("grid value {t} is not a finite nonnegative time")));
    }
    let t1 = expm(a).real_part();
    let pattern = ZeroPattern::from_matrix(&t1, tol)?;
    let red = reducibility_components(&t1, tol)?;
    let mut min_entry = f64::INFINITY;
    let mut max_zero_entry: f64 = 0.0;
    let mut max_leak: f64 = 0.0;
    for &s in grid {
        let ts = expm(&a.scale_real(s));
        min_entry = min_entry.min(ts.min_real_entry());
        for i in 0..n {
            for j in 0..n {
                if i != j && !pattern.is_nonzero(i, j) {
                    max_zero_entry = max_zero_entry.max(ts[(i, j)].norm());
                }
            }
        }
        for set in &red.reducing_subspaces {
            for &j in set {
                for i in (0..n).filter(|i| !set.contains(i)) {
                    max_leak = max_leak.max(ts[(i, j)].norm());
                }
            }
        }
    }
    if grid.is_empty() {
        min_entry = 0.0;
    }
    Ok(FlowCheck {
        min_entry,
        max_zero_entry,
        max_reducing_leak: max_leak,
        pattern_persists: max_zero_entry <= tol.positivity_tol,
        subspaces_invariant: max_leak <= tol.positivity_tol,
    })
}

/// Whether `a` is Metzler within `positivity_tol` (relative to its size).
pub fn is_metzler(a: &Matrix, tol: &Tolerances) -> bool {
    let n = a.rows();
    let cut = -tol.positivity_tol * a.max_abs().max(1.0);
    (0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)].re >= cut))
}

/// One logarithm branch offset shared by a pair of columns of `P`.
#[derive(Debug, Clone)]
enum Slot {
    /// Conjugate eigenvector columns `(p, q)`; offsets `+2 pi k`, `-2 pi k`.
    Conjugate { p: usize, q: usize, lambda: C64 },
    /// Two real eigenvector columns at a real eigenvalue; the rotation
    /// `[[log|lambda|, -theta], [theta, log|lambda|]]` with `theta = 2 pi k`
    /// for `lambda > 0` and `(2k + 1) pi` for `lambda < 0`.
    Rotation { p: usize, q: usize, lambda: f64 },
}

impl Slot {
    fn range(&self, bound: i64) -> (i64, i64) {
        match self {
            Slot::Rotation { lambda, .. } if *lambda < 0.0 => (-bound - 1, bound),
            _ => (-bound, bound),
        }
    }

    fn cost(&self, k: i64) -> i64 {
        match self {
            Slot::Rotation { lambda, .. } if *lambda < 0.0 => k.abs().min((k + 1).abs()),
            _ => k.abs(),
        }
    }
}

/// Branch structure of a diagonalizable real matrix.
struct Branches {
    transform: Matrix,
    /// Principal logarithm in the eigenbasis (rotations zero).
    base: Matrix,
    slots: Vec<Slot>,
}

/// Candidate logarithms with at most this many branch assignments are tried.
const CANDIDATE_LIMIT: usize = 200_000;

fn branches(t: &Matrix, tol: &Tolerances) -> core::result::Result<Branches, String> {
    let js = jordan_decompose(t, tol).map_err(|e| format!("{e}"))?;
    if let Some(b) = js.blocks.iter().find(|b| b.dimension > 1) {
        return Err(format!(
            "not diagonalizable (Jordan block of dimension {} at {:e}{:+e}i)",
            b.dimension, b.eigenvalue.re, b.eigenvalue.im
        ));
    }
    let n = js.blocks.len();
    let norm = linalg::opnorm(t);
    let cluster_of = |lambda: C64| js.clusters.iter().position(|c| c.eigenvalue == lambda).unwrap_or(usize::MAX);
    let mut columns: Vec<Vec<usize>> = vec![Vec::new(); js.clusters.len()];
    for (i, b) in js.blocks.iter().enumerate() {
        let c = cluster_of(b.eigenvalue);
        if c == usize::MAX {
            return Err("block without a cluster".into());
        }
        columns[c].push(i);
    }
    let mut base = Matrix::zeros(n, n);
    let mut slots = Vec::new();
    for (ci, cluster) in js.clusters.iter().enumerate() {
        let lambda = cluster.eigenvalue;
        match classify_eigenvalue(lambda, norm, tol) {
            EigenClass::Zero => return Err("zero eigenvalue".into()),
            EigenClass::NonReal => {
                for &p in &columns[ci] {
                    base[(p, p)] = lambda.ln();
                }
                if let Some(partner) = cluster.conjugate {
                    if partner > ci {
                        for (&p, &q) in columns[ci].iter().zip(&columns[partner]) {
                            slots.push(Slot::Conjugate { p, q, lambda });
                        }
                    }
                } else if js.real_input {
                    return Err("nonreal eigenvalue without conjugate partner".into());
                }
            }
            class => {
                let cols = &columns[ci];
                if class == EigenClass::NegativeReal && cols.len() % 2 == 1 {
                    return Err(format!("odd multiplicity at negative eigenvalue {:e}", lambda.re));
                }
                for &p in cols {
                    base[(p, p)] = c64(lambda.re.abs().ln(), 0.0);
                }
                for pair in cols.chunks(2) {
                    if let [p, q] = *pair {
                        slots.push(Slot::Rotation { p, q, lambda: lambda.re });
                    }
                }
            }
        }
    }
    Ok(Branches { transform: js.transform, base, slots })
}

impl Branches {
    fn log_for(&self, ks: &[i64]) -> Matrix {
        let mut l = self.base.clone();
        for (slot, &k) in self.slots.iter().zip(ks) {
            match *slot {
                Slot::Conjugate { p, q, .. } => {
                    l[(p, p)] += c64(0.0, 2.0 * PI * k as f64);
                    l[(q, q)] -= c64(0.0, 2.0 * PI * k as f64);
                }
                Slot::Rotation { p, q, lambda } => {
                    let theta = if lambda < 0.0 { (2 * k + 1) as f64 * PI } else { 2.0 * PI * k as f64 };
                    l[(p, q)] = c64(-theta, 0.0);
                    l[(q, p)] = c64(theta, 0.0);
                }
            }
        }
        l
    }

    fn branch_log(&self, ks: &[i64]) -> Vec<(C64, i64)> {
        self.slots
            .iter()
            .zip(ks)
            .map(|(s, &k)| match *s {
                Slot::Conjugate { lambda, .. } => (lambda, k),
                Slot::Rotation { lambda, .. } => (c64(lambda, 0.0), k),
            })
            .collect()
    }

    /// Branch assignments ordered by total cost, then lexicographically.
    fn assignments(&self, bound: i64) -> Option<Vec<Vec<i64>>> {
        let mut total: usize = 1;
        for s in &self.slots {
            let (lo, hi) = s.range(bound);
            total = total.checked_mul((hi - lo + 1) as usize)?;
            if total > CANDIDATE_LIMIT {
                return None;
            }
        }
        let mut out: Vec<Vec<i64>> = vec![Vec::new()];
        for s in &self.slots {
            let (lo, hi) = s.range(bound);
            out = out.into_iter().flat_map(|prefix| (lo..=hi).map(move |k| {
                let mut v = prefix.clone();
                v.push(k);
                v
            })).collect();
        }
        let cost = |ks: &Vec<i64>| -> i64 { self.slots.iter().zip(ks).map(|(s, &k)| s.cost(k)).sum() };
        out.sort_by(|x, y| cost(x).cmp(&cost(y)).then_with(|| x.cmp(y)));
        Some(out)
    }
}

/// Whether `A` passes the search filter: real, Metzler, `e^A = T` and a
/// positive flow on the verification grid.
fn survives(a: &Matrix, t: &Matrix, tol: &Tolerances) -> Option<Matrix> {
    let scale = a.max_abs().max(1.0);
    if a.max_abs_imag() > 1e-8 * scale {
        return None;
    }
    let a = a.real_part();
    if !is_metzler(&a, tol) {
        return None;
    }
    if !(relative_residual(&a, t) <= tol.verify_tol) {
        return None;
    }
    for s in verification_grid() {
        let ts = expm(&a.scale_real(s));
        if ts.min_real_entry() < -tol.positivity_tol * ts.max_abs().max(1.0) {
            return None;
        }
    }
    Some(a)
}

/// All Metzler logarithms found with branch offsets `|k| <= branch_bound`,
/// in search order. `Err` carries the reason the search could not run.
pub fn metzler_log_candidates(
    t: &Matrix,
    branch_bound: u32,
    tol: &Tolerances,
) -> Result<core::result::Result<Vec<EmbeddingCertificate>, String>> {
    require_positive(t, tol)?;
    let t = t.real_part();
    let br = match branches(&t, tol) {
        Ok(b) => b,
        Err(why) => return Ok(Err(why)),
    };
    let Some(all) = br.assignments(branch_bound as i64) else {
        return Ok(Err(format!("more than {CANDIDATE_LIMIT} branch assignments")));
    };
    let mut out = Vec::new();
    for ks in &all {
        if let Some(cert) = try_branch(&br, ks, &t, tol)? {
            out.push(cert);
        }
    }
    Ok(Ok(out))
}

fn try_branch(br: &Branches, ks: &[i64], t: &Matrix, tol: &Tolerances) -> Result<Option<EmbeddingCertificate>> {
    let l = br.log_for(ks);
    let p = &br.transform;
    let pl = p.matmul(&l);
    let strict = Tolerances { rank_tol: tol.rank_tol.min(1e-13), ..*tol };
    let a = match linalg::solve(&p.transpose(), &pl.transpose(), &strict) {
        Ok(xt) => xt.transpose(),
        Err(Error::Singular) => return Ok(None),
        Err(e) => return Err(e),
    };
    Ok(survives(&a, t, tol).map(|generator| {
        let residual = relative_residual(&generator, t);
        EmbeddingCertificate {
            generator,
            residual,
            branch_log: br.branch_log(ks),
            construction: Construction::MetzlerSearch,
        }
    }))
}

/// Searches the real logarithm branches of a diagonalizable positive matrix
/// for a Metzler generator. Exhaustion yields UNDECIDED, never NO.
pub fn metzler_log_search(t: &Matrix, branch_bound: u32, tol: &Tolerances) -> Result<PositiveDecision> {
    let battery = necessary_battery(t, tol)?;
    if battery.verdict == Verdict::NotEmbeddable {
        return Ok(PositiveDecision::from_battery(battery));
    }
    let mut reasons = battery.conditions;
    let t = t.real_part();
    let br = match branches(&t, tol) {
        Ok(b) => b,
        Err(why) => return Ok(undecided(reasons, why)),
    };
    let Some(all) = br.assignments(branch_bound as i64) else {
        return Ok(undecided(reasons, format!("more than {CANDIDATE_LIMIT} branch assignments")));
    };
    for ks in &all {
        if let Some(cert) = try_branch(&br, ks, &t, tol)? {
            reasons.push(Condition::new(
                "METZLER_LOG",
                CITE_SEARCH,
                ConditionStatus::Satisfied,
                format!("Metzler logarithm at branch offsets {ks:?}"),
            ));
            return Ok(PositiveDecision { verdict: Verdict::Embeddable, reasons, certificate: Some(cert) });
        }
    }
    Ok(undecided(
        reasons,
        format!("no Metzler logarithm among {} branch assignments with |k| <= {branch_bound}", all.len()),
    ))
}

fn undecided(mut reasons: Vec<Condition>, why: String) -> PositiveDecision {
    reasons.push(Condition::new("METZLER_LOG", CITE_SEARCH, ConditionStatus::NotApplicable, why));
    PositiveDecision { verdict: Verdict::Undecided, reasons, certificate: None }
}

/// Recognises `r [[1, a, c], [0, 1, b], [0, 0, 1]]` (or its transpose) and
/// returns `(r, a, b, c, transposed)`.
fn scaled_unipotent(t: &Matrix, tol: &Tolerances) -> Option<(f64, f64, f64, f64, bool)> {
    if t.rows() != 3 {
        return None;
    }
    let r = t[(0, 0)].re;
    let cut = zero_cut(t, tol);
    if !(r > cut) || (0..3).any(|i| (t[(i, i)].re - r).abs() > cut) {
        return None;
    }
    let lower_zero = |m: &Matrix| m[(1, 0)].re.abs() <= cut && m[(2, 0)].re.abs() <= cut && m[(2, 1)].re.abs() <= cut;
    for transposed in [false, true] {
        let m = if transposed { t.transpose() } else { t.clone() };
        if lower_zero(&m) {
            let a = m[(0, 1)].re.max(0.0) / r;
            let b = m[(1, 2)].re.max(0.0) / r;
            let c = m[(0, 2)].re.max(0.0) / r;
            return Some((r, a, b, c, transposed));
        }
    }
    None
}

/// Full positive-embeddability pipeline: necessary battery and real parity,
/// then the most specific decider (exact `2 x 2`, exact scaled unipotent
/// `3 x 3`, otherwise the branch search).
pub fn decide_positive(t: &Matrix, branch_bound: u32, tol: &Tolerances) -> Result<PositiveDecision> {
    let battery = necessary_battery(t, tol)?;
    let mut reasons = battery.conditions;
    let t = t.real_part();
    if let Ok(real) = real_embed::decide_real_embeddable(&t, tol) {
        if let Some(parity) = real.conditions.into_iter().find(|c| c.name == "PARITY") {
            reasons.push(parity);
        }
    }
    if reasons.iter().any(Condition::violated) {
        return Ok(PositiveDecision { verdict: Verdict::NotEmbeddable, reasons, certificate: None });
    }
    let n = t.rows();
    if n == 2 {
        let mut d = decide_positive_2x2(&t, tol)?;
        reasons.retain(|c| c.name != "N5");
        reasons.append(&mut d.reasons);
        return Ok(PositiveDecision { verdict: d.verdict, reasons, certificate: d.certificate });
    }
    if let Some((r, a, b, c, transposed)) = scaled_unipotent(&t, tol) {
        let mut d = decide_unipotent3(a, b, c, tol)?;
        reasons.push(Condition::new(
            "SCALING",
            CITE_SCALING,
            ConditionStatus::Satisfied,
            format!("T = {r} U with U unipotent{}", if transposed { " (lower triangular)" } else { "" }),
        ));
        reasons.append(&mut d.reasons);
        let certificate = match d.certificate {
            Some(cert) => {
                let mut g = if transposed { cert.generator.transpose() } else { cert.generator };
                for i in 0..3 {
                    g[(i, i)] += c64(r.ln(), 0.0);
                }
                Some(certify(g, &t, vec![(c64(r, 0.0), 0)], Construction::Unipotent3, tol)?)
            }
            None => None,
        };
        return Ok(PositiveDecision { verdict: d.verdict, reasons, certificate });
    }
    let mut d = metzler_log_search(&t, branch_bound, tol)?;
    let mut merged = reasons;
    merged.extend(d.reasons.drain(..).filter(|c| !c.name.starts_with('N')));
    Ok(PositiveDecision { verdict: d.verdict, reasons: merged, certificate: d.certificate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn m(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_real_rows(rows)
    }

    fn status(reasons: &[Condition], name: &str) -> ConditionStatus {
        reasons.iter().find(|c| c.name == name).map(|c| c.status).unwrap()
    }

    #[test]
    fn battery_examples() {
        let r = necessary_battery(&m(&[[0.0, 1.0], [1.0, 0.0]]), &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::NotEmbeddable);
        assert_eq!(status(&r.conditions, "N1"), ConditionStatus::Violated);

        let r = necessary_battery(&m(&[[0.5, 0.5], [1.0, 0.0]]), &tol()).unwrap();
        assert_eq!(status(&r.conditions, "N1"), ConditionStatus::Violated);

        let j3 = Matrix::jordan_block(c64(1.0, 0.0), 3);
        let r = necessary_battery(&j3, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::NotEmbeddable);
        assert_eq!(status(&r.conditions, "N3"), ConditionStatus::Violated);
        assert_eq!(status(&r.conditions, "N1"), ConditionStatus::Satisfied);

        let r = necessary_battery(&m(&[[2.0, 1.0], [1.0, 2.0]]), &tol()).unwrap();
        assert!(r.violations().next().is_none());

        assert!(matches!(
            necessary_battery(&m(&[[1.0, -0.5], [0.0, 1.0]]), &tol()),
            Err(Error::NotPositive { .. })
        ));
    }

    #[test]
    fn irreducible_with_zero_fails_n4() {
        let t = Matrix::from_real_rows(&[[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]]);
        let r = necessary_battery(&t, &tol()).unwrap();
        assert_eq!(status(&r.conditions, "N4"), ConditionStatus::Violated);
    }

    #[test]
    fn reducibility_examples() {
        let full = Matrix::from_fn(3, 3, |_, _| c64(1.0, 0.0));
        let r = reducibility_components(&full, &tol()).unwrap();
        assert_eq!(r.components, vec![vec![0, 1, 2]]);
        assert!(r.irreducible && r.reducing_subspaces.is_empty());

        let upper = Matrix::from_real_rows(&[[1.0, 2.0, 3.0], [0.0, 4.0, 5.0], [0.0, 0.0, 6.0]]);
        let r = reducibility_components(&upper, &tol()).unwrap();
        assert_eq!(r.components, vec![vec![0], vec![1], vec![2]]);
        assert_eq!(r.reducing_subspaces, vec![vec![0], vec![0, 1]]);
        for set in &r.reducing_subspaces {
            for &j in set {
                for i in (0..3).filter(|i| !set.contains(i)) {
                    assert_eq!(upper[(i, j)].re, 0.0);
                }
            }
        }

        let cyc = Matrix::from_real_rows(&[[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [1.0, 0.0, 1.0]]);
        let r = reducibility_components(&cyc, &tol()).unwrap();
        assert!(r.irreducible);

        let d = Matrix::from_real_diag(&[1.0, 2.0, 3.0]);
        let r = reducibility_components(&d, &tol()).unwrap();
        assert_eq!(r.reducing_subspaces.len(), 6);
    }

    #[test]
    fn two_by_two_decisions() {
        let d = decide_positive_2x2(&m(&[[2.0, 1.0], [1.0, 2.0]]), &tol()).unwrap();
        assert_eq!(d.verdict, Verdict::Embeddable);
        let a = &d.certificate.as_ref().unwrap().generator;
        let h = 0.5 * 3.0f64.ln();
        assert!((a - &m(&[[h, h], [h, h]])).max_abs() < 1e-14);

        let d = decide_positive_2x2(&m(&[[0.0, 1.0], [1.0, 0.0]]), &tol()).unwrap();
        assert_eq!(d.verdict, Verdict::NotEmbeddable);
        assert_eq!(status(&d.reasons, "N5"), ConditionStatus::Violated);

        let d = decide_positive_2x2(&m(&[[1.0, 1.0], [1.0, 1.0]]), &tol()).unwrap();
        assert_eq!(d.verdict, Verdict::NotEmbeddable);
        assert_eq!(status(&d.reasons, "N5"), ConditionStatus::Boundary);
        assert!(d.violations().next().is_some());

        assert!(matches!(
            decide_positive_2x2(&Matrix::identity(3), &tol()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn two_by_two_constructions() {
        let c = construct_positive_2x2(&Matrix::from_real_diag(&[4.0, 4.0]), &tol()).unwrap();
        assert!((&c.generator - &Matrix::from_real_diag(&[4f64.ln(), 4f64.ln()])).max_abs() < 1e-15);

        let c = construct_positive_2x2(&m(&[[2.0, 1.0], [0.0, 2.0]]), &tol()).unwrap();
        let l2 = 2f64.ln();
        assert!((&c.generator - &m(&[[l2, 0.5], [0.0, l2]])).max_abs() < 1e-15);

        let c = construct_positive_2x2(&m(&[[2.0, 0.0], [3.0, 2.0]]), &tol()).unwrap();
        assert!((&c.generator - &m(&[[l2, 0.0], [1.5, l2]])).max_abs() < 1e-15);

        let t = m(&[[0.9, 0.05], [0.3, 0.4]]);
        let c = construct_positive_2x2(&t, &tol()).unwrap();
        assert!(is_metzler(&c.generator, &tol()));
        assert!(c.residual < 1e-13);
    }

    #[test]
    fn unipotent_examples() {
        assert_eq!(decide_unipotent3(1.0, 1.0, 0.5, &tol()).unwrap().verdict, Verdict::Embeddable);
        assert_eq!(decide_unipotent3(1.0, 1.0, 0.3, &tol()).unwrap().verdict, Verdict::NotEmbeddable);
        assert_eq!(decide_unipotent3(0.0, 7.0, 0.0, &tol()).unwrap().verdict, Verdict::Embeddable);
        assert!(matches!(decide_unipotent3(-1.0, 1.0, 1.0, &tol()), Err(Error::Domain(_))));

        let c = construct_unipotent3(1.0, 1.0, 0.5, &tol()).unwrap();
        assert_eq!(c.generator[(0, 2)].re, 0.0);
        let c = construct_unipotent3(1.0, 1.0, 1.0, &tol()).unwrap();
        assert_eq!(c.generator[(0, 2)].re, 0.5);
        let t2 = expm(&c.generator.scale_real(2.0));
        assert!((t2[(0, 2)].re - 3.0).abs() < 1e-14);
        let c = construct_unipotent3(0.0, 0.0, 2.5, &tol()).unwrap();
        assert_eq!(c.generator, Matrix::from_real_rows(&[[0.0, 0.0, 2.5], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]));
        assert!(matches!(construct_unipotent3(1.0, 1.0, 0.3, &tol()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn unipotent_square_roots() {
        let s = positive_sqrt_unipotent3(1.0, 1.0, 0.3, &tol()).unwrap();
        let expect = Matrix::from_real_rows(&[[1.0, 0.5, 0.025], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]]);
        assert!((&s - &expect).max_abs() < 1e-15);
        assert!((&s.matmul(&s) - &unipotent3(1.0, 1.0, 0.3)).max_abs() < 1e-15);
        assert!(positive_sqrt_unipotent3(1.0, 1.0, 0.2, &tol()).is_none());
        let s = positive_sqrt_unipotent3(0.0, 0.0, 1.0, &tol()).unwrap();
        assert_eq!(s[(0, 2)].re, 0.5);
    }

    #[test]
    fn search_examples() {
        let d = metzler_log_search(&Matrix::identity(3), 2, &tol()).unwrap();
        assert_eq!(d.verdict, Verdict::Embeddable);
        assert!(d.certificate.as_ref().unwrap().generator.max_abs() < 1e-14);
        let all = metzler_log_candidates(&Matrix::identity(4), 2, &tol()).unwrap().unwrap();
        assert_eq!(all.len(), 1);

        let d = metzler_log_search(&m(&[[2.0, 1.0], [1.0, 2.0]]), 2, &tol()).unwrap();
        let h = 0.5 * 3.0f64.ln();
        assert!((&d.certificate.unwrap().generator - &m(&[[h, h], [h, h]])).max_abs() < 1e-12);

        let j3 = Matrix::jordan_block(c64(1.0, 0.0), 3);
        assert_eq!(metzler_log_search(&j3, 2, &tol()).unwrap().verdict, Verdict::NotEmbeddable);
        let r = metzler_log_candidates(&j3, 2, &tol()).unwrap();
        assert!(r.is_err());
    }

    #[test]
    fn search_finds_flow_of_metzler_generator() {
        let a = Matrix::from_real_rows(&[[-1.0, 0.3, 0.2], [0.4, -0.7, 0.1], [0.2, 0.5, -0.9]]);
        let t = expm(&a);
        let d = metzler_log_search(&t, 1, &tol()).unwrap();
        assert_eq!(d.verdict, Verdict::Embeddable);
        assert!((&d.certificate.unwrap().generator - &a).max_abs() < 1e-10);
    }

    #[test]
    fn flow_checks() {
        let cert = EmbeddingCertificate {
            generator: Matrix::zeros(3, 3),
            residual: 0.0,
            branch_log: Vec::new(),
            construction: Construction::MetzlerSearch,
        };
        let f = positive_flow_check(&cert, &verification_grid(), &tol()).unwrap();
        assert_eq!(f.min_entry, 0.0);
        assert!(f.pattern_persists && f.subspaces_invariant);

        let cert = construct_positive_2x2(&m(&[[2.0, 1.0], [0.0, 2.0]]), &tol()).unwrap();
        let f = positive_flow_check(&cert, &verification_grid(), &tol()).unwrap();
        assert!(f.min_entry >= 0.0);
        assert_eq!(f.max_zero_entry, 0.0);

        let cert = construct_unipotent3(1.0, 1.0, 0.5, &tol()).unwrap();
        let f = positive_flow_check(&cert, &verification_grid(), &tol()).unwrap();
        assert!(f.min_entry >= 0.0 && f.pattern_persists && f.subspaces_invariant);
        assert!(positive_flow_check(&cert, &[-1.0], &tol()).is_err());
    }

    #[test]
    fn composite_jordan_blocks() {
        for lambda in [0.5, 1.0, 3.0] {
            for d in 1..=4 {
                let j = Matrix::jordan_block(c64(lambda, 0.0), d);
                let r = decide_positive(&j, 2, &tol()).unwrap();
                let expect = if d <= 2 { Verdict::Embeddable } else { Verdict::NotEmbeddable };
                assert_eq!(r.verdict, expect, "lambda = {lambda}, d = {d}");
            }
        }
    }

    #[test]
    fn composite_unipotent_pattern() {
        let t = Matrix::from_real_rows(&[[1.0, 1.0, 0.5], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]);
        let d = decide_positive(&t, 2, &tol()).unwrap();
        assert_eq!(d.verdict, Verdict::Embeddable);
        assert_eq!(d.certificate.unwrap().generator[(0, 2)].re, 0.0);

        let t = Matrix::from_real_rows(&[[2.0, 0.0, 0.0], [2.0, 2.0, 0.0], [0.2, 2.0, 2.0]]);
        let d = decide_positive(&t, 2, &tol()).unwrap();
        assert_eq!(d.verdict, Verdict::NotEmbeddable);
        assert!(d.violations().any(|c| c.name == "UNIPOTENT3"));
    }
}
