//! Real embeddability of finite real matrices.
//!
//! A real invertible `T` is `e^A` for a real `A` exactly when, at every
//! negative eigenvalue, Jordan blocks of each dimension occur an even number
//! of times. The generator is assembled block by block on the Jordan
//! structure:
//!
//! - a block `J(lambda, d)` with `lambda` off `(-inf, 0]` gets
//!   `log(lambda) I + log(I + N / lambda)`, the series terminating because
//!   `N` is nilpotent; conjugate blocks of a real matrix carry conjugate
//!   chains, so the assembled generator is real;
//! - two equal blocks `J` at a negative eigenvalue are handled together:
//!   `S = [[0, I], [J, 0]]` squares to `diag(J, J)` and has spectrum on the
//!   imaginary axis, so `2 log S` is a real logarithm of the pair.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::{Float, Zero};

use crate::error::{Error, Result};
use crate::jordan::{jordan_decompose, JordanStructure};
use crate::linalg::{self, classify_eigenvalue, expm, EigenClass, Tolerances};
use crate::matrix::{c64, Matrix, C64};
use crate::report::{
    BlockParity, Condition, ConditionStatus, Construction, DecisionReport, EmbeddingCertificate, TrajectorySample,
    Verdict,
};

pub const CITE_INVERTIBLE: &str =
    "a matrix embeddable into a semigroup has trivial kernel and full range, so a finite one is invertible";
pub const CITE_PARITY: &str =
    "a real matrix is real-embeddable iff every Jordan block at every negative eigenvalue occurs evenly many times";

fn require_real_square(t: &Matrix, tol: &Tolerances) -> Result<usize> {
    let n = t.ensure_square()?;
    if n == 0 {
        return Err(Error::Domain("empty matrix".into()));
    }
    if !t.is_finite() {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    if !t.is_real(tol.positivity_tol) {
        return Err(Error::Domain(format!(
            "matrix is not real (max |Im| = {:e})",
            t.max_abs_imag()
        )));
    }
    Ok(n)
}

fn evaluate(t: &Matrix, js: &JordanStructure, tol: &Tolerances) -> DecisionReport {
    let norm = linalg::opnorm(t);
    let mut zero_clusters = Vec::new();
    let mut negative_blocks = Vec::new();
    for c in &js.clusters {
        match classify_eigenvalue(c.eigenvalue, norm, tol) {
            EigenClass::Zero => zero_clusters.push(c.eigenvalue),
            EigenClass::NegativeReal => {
                for (d, count) in c.block_counts() {
                    negative_blocks.push(BlockParity {
                        eigenvalue: c64(c.eigenvalue.re, 0.0),
                        dimension: d,
                        count,
                        even: count % 2 == 0,
                    });
                }
            }
            _ => {}
        }
    }

    let invertible = if zero_clusters.is_empty() {
        Condition::new("INVERTIBLE", CITE_INVERTIBLE, ConditionStatus::Satisfied, "no eigenvalue classified zero".into())
    } else {
        Condition::new(
            "INVERTIBLE",
            CITE_INVERTIBLE,
            ConditionStatus::Violated,
            format!("eigenvalue classified zero (|lambda| = {:e})", zero_clusters[0].norm()),
        )
    };

    let odd: Vec<&BlockParity> = negative_blocks.iter().filter(|b| !b.even).collect();
    let parity = if negative_blocks.is_empty() {
        Condition::new("PARITY", CITE_PARITY, ConditionStatus::Satisfied, "no negative eigenvalues".into())
    } else if odd.is_empty() {
        Condition::new(
            "PARITY",
            CITE_PARITY,
            ConditionStatus::Satisfied,
            describe_blocks(&negative_blocks),
        )
    } else {
        let b = odd[0];
        Condition::new(
            "PARITY",
            CITE_PARITY,
            ConditionStatus::Violated,
            format!(
                "odd Jordan-block count at {}: {} block(s) of dimension {}",
                fmt_real(b.eigenvalue.re),
                b.count,
                b.dimension
            ),
        )
    };

    let verdict = if invertible.violated() || parity.violated() { Verdict::NotEmbeddable } else { Verdict::Embeddable };
    DecisionReport {
        verdict,
        conditions: vec![invertible, parity],
        negative_blocks,
        jordan_condition: Some(js.condition_number()),
    }
}

fn fmt_real(x: f64) -> String {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        format!("{r}")
    } else {
        format!("{x:.6}")
    }
}

fn describe_blocks(blocks: &[BlockParity]) -> String {
    let mut s = String::new();
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 {
            s.push_str("; ");
        }
        s.push_str(&format!("{} block(s) of dimension {} at {}", b.count, b.dimension, fmt_real(b.eigenvalue.re)));
    }
    s
}

/// Decides whether a real square matrix embeds into a real semigroup.
pub fn decide_real_embeddable(t: &Matrix, tol: &Tolerances) -> Result<DecisionReport> {
    require_real_square(t, tol)?;
    let js = jordan_decompose(t, tol)?;
    Ok(evaluate(t, &js, tol))
}

/// `log(I + N / lambda)` with the principal `log(lambda)` added on the
/// diagonal, for a single `d x d` block.
fn block_log(lambda: C64, d: usize) -> Matrix {
    let mut l = Matrix::zeros(d, d);
    let ln = lambda.ln();
    for i in 0..d {
        l[(i, i)] = ln;
    }
    // (N / lambda)^k has lambda^-k on the k-th superdiagonal.
    let inv = lambda.inv();
    let mut p = c64(1.0, 0.0);
    for k in 1..d {
        p *= inv;
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        let coef = p * (sign / k as f64);
        for i in 0..(d - k) {
            l[(i, i + k)] = coef;
        }
    }
    l
}

/// Principal logarithm of a matrix whose spectrum avoids `(-inf, 0]`,
/// through its Jordan structure.
pub fn principal_log(m: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let js = jordan_decompose(m, tol)?;
    let norm = linalg::opnorm(m);
    let mut blocks = Vec::with_capacity(js.blocks.len());
    for b in &js.blocks {
        match classify_eigenvalue(b.eigenvalue, norm, tol) {
            EigenClass::Zero | EigenClass::NegativeReal => {
                return Err(Error::Domain(format!(
                    "principal logarithm undefined: eigenvalue {:e}{:+e}i on (-inf, 0]",
                    b.eigenvalue.re, b.eigenvalue.im
                )))
            }
            _ => blocks.push(block_log(b.eigenvalue, b.dimension)),
        }
    }
    let l = Matrix::block_diag(&blocks);
    let mut a = conjugate_back(&js.transform, &l, tol)?;
    if js.real_input {
        a = a.real_part();
    }
    Ok(a)
}

/// `P L P^-1`.
fn conjugate_back(p: &Matrix, l: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let pl = p.matmul(l);
    // Solve X P = P L  <=>  P^T X^T = (P L)^T.
    let xt = linalg::solve(&p.transpose(), &pl.transpose(), &Tolerances { rank_tol: tol.rank_tol.min(1e-13), ..*tol })?;
    Ok(xt.transpose())
}

fn relative_residual(a: &Matrix, t: &Matrix) -> f64 {
    let e = expm(a);
    linalg::opnorm(&(&e - t)) / linalg::opnorm(t).max(f64::MIN_POSITIVE)
}

/// Real generator `A` with `e^A = T`, for real-embeddable `T`.
pub fn real_logarithm(t: &Matrix, tol: &Tolerances) -> Result<EmbeddingCertificate> {
    let n = require_real_square(t, tol)?;
    let t = t.real_part();
    let js = jordan_decompose(&t, tol)?;
    let report = evaluate(&t, &js, tol);
    if !report.is_yes() {
        let why = report.violations().map(|c| c.detail.clone()).next().unwrap_or_default();
        return Err(Error::NotEmbeddable(why));
    }
    let norm = linalg::opnorm(&t);

    // Column offsets of the blocks in P.
    let mut offsets = Vec::with_capacity(js.blocks.len());
    let mut off = 0;
    for b in &js.blocks {
        offsets.push(off);
        off += b.dimension;
    }

    let mut l = Matrix::zeros(n, n);
    let mut used_pairs = false;
    // Negative blocks waiting for a partner, keyed by (cluster, dimension).
    let mut pending: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for (bi, b) in js.blocks.iter().enumerate() {
        let o = offsets[bi];
        let d = b.dimension;
        match classify_eigenvalue(b.eigenvalue, norm, tol) {
            EigenClass::NegativeReal => {
                let cluster = js
                    .clusters
                    .iter()
                    .position(|c| c.eigenvalue == b.eigenvalue)
                    .unwrap_or(usize::MAX);
                match pending.remove(&(cluster, d)) {
                    None => {
                        pending.insert((cluster, d), bi);
                    }
                    Some(first) => {
                        let o1 = offsets[first];
                        let gen = paired_negative_log(b.eigenvalue.re, d, tol)?;
                        let idx: Vec<usize> = (o1..o1 + d).chain(o..o + d).collect();
                        for (r, &gi) in idx.iter().enumerate() {
                            for (c, &gj) in idx.iter().enumerate() {
                                l[(gi, gj)] = gen[(r, c)];
                            }
                        }
                        used_pairs = true;
                    }
                }
            }
            EigenClass::Zero => return Err(Error::NotEmbeddable("zero eigenvalue".into())),
            _ => l.set_block(o, o, &block_log(b.eigenvalue, d)),
        }
    }
    if let Some(((_, d), bi)) = pending.into_iter().next() {
        return Err(Error::NotEmbeddable(format!(
            "unpaired Jordan block of dimension {d} at {}",
            fmt_real(js.blocks[bi].eigenvalue.re)
        )));
    }

    let a_complex = conjugate_back(&js.transform, &l, tol)?;
    let a_norm = a_complex.max_abs().max(1.0);
    let imag = a_complex.max_abs_imag();
    if imag > 1e-6 * a_norm {
        return Err(Error::StructureAmbiguous {
            cluster: C64::zero(),
            detail: format!("assembled generator is not real (max |Im| = {imag:e})"),
        });
    }
    let generator = a_complex.real_part();
    let residual = relative_residual(&generator, &t);
    if !(residual <= tol.verify_tol) {
        return Err(Error::Verification { residual, tolerance: tol.verify_tol });
    }
    let branch_log = js.clusters.iter().map(|c| (c.eigenvalue, 0)).collect();
    Ok(EmbeddingCertificate {
        generator,
        residual,
        branch_log,
        construction: if used_pairs { Construction::PairedNegativeBlocks } else { Construction::JordanLog },
    })
}

/// Real logarithm of `diag(J, J)` for `J = J(lambda, d)`, `lambda < 0`,
/// as `2 log S` with `S = [[0, I], [J, 0]]`.
fn paired_negative_log(lambda: f64, d: usize, tol: &Tolerances) -> Result<Matrix> {
    let j = Matrix::jordan_block(c64(lambda, 0.0), d);
    let mut s = Matrix::zeros(2 * d, 2 * d);
    s.set_block(0, d, &Matrix::identity(d));
    s.set_block(d, 0, &j);
    Ok(principal_log(&s, tol)?.real_part().scale_real(2.0))
}

/// Real square root `S = e^(A/2)` of a real-embeddable matrix.
pub fn real_square_root(t: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let cert = real_logarithm(t, tol)?;
    let s = expm(&cert.generator.scale_real(0.5)).real_part();
    let res = linalg::opnorm(&(&s.matmul(&s) - &t.real_part())) / linalg::opnorm(t).max(f64::MIN_POSITIVE);
    if !(res <= tol.verify_tol) {
        return Err(Error::Verification { residual: res, tolerance: tol.verify_tol });
    }
    Ok(s)
}

/// Generalised binomial coefficient `t (t-1) ... (t-n+1) / n!`.
pub fn binom(t: f64, n: u32) -> f64 {
    let mut acc = 1.0;
    for k in 0..n {
        acc *= (t - k as f64) / (k + 1) as f64;
    }
    acc
}

/// `J(lambda, d)^t = lambda^t sum_{n<d} binom(t, n) (N / lambda)^n` for
/// `lambda > 0` and real `t`.
pub fn jordan_block_power(lambda: f64, d: usize, t: f64) -> Result<Matrix> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("Jordan block power needs lambda > 0, got {lambda}")));
    }
    if d == 0 {
        return Err(Error::Domain("block dimension must be positive".into()));
    }
    let scale = lambda.powf(t);
    let mut m = Matrix::zeros(d, d);
    for k in 0..d {
        let v = scale * binom(t, k as u32) * lambda.powi(-(k as i32));
        for i in 0..(d - k) {
            m[(i, i + k)] = c64(v, 0.0);
        }
    }
    Ok(m)
}

/// `|binom(t+s, j) - sum_k binom(t, k) binom(s, j-k)|`, divided by
/// `max(1, sum_k |binom(t, k) binom(s, j-k)|)` so that large coefficients are
/// judged at their own scale.
pub fn chu_vandermonde_check(j: u32, t: f64, s: f64) -> f64 {
    let lhs = binom(t + s, j);
    let terms = (0..=j).map(|k| binom(t, k) * binom(s, j - k));
    let (rhs, scale) = terms.fold((0.0, 0.0), |(sum, mag): (f64, f64), x| (sum + x, mag + x.abs()));
    (lhs - rhs).abs() / scale.max(1.0)
}

/// `e^(tA)` on every grid point.
pub fn sample_semigroup(cert: &EmbeddingCertificate, grid: &[f64]) -> Result<TrajectorySample> {
    sample_generator(&cert.generator, grid)
}

pub fn sample_generator(a: &Matrix, grid: &[f64]) -> Result<TrajectorySample> {
    a.ensure_square()?;
    if let Some(t) = grid.iter().find(|t| !t.is_finite()) {
        return Err(Error::Domain(format!("grid value {t} is not finite")));
    }
    let points = grid.iter().map(|&t| (t, expm(&a.scale_real(t)))).collect();
    Ok(TrajectorySample { points })
}
