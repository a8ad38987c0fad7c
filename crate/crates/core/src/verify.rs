//! Seeded ensembles, a brute-force Jordan oracle and property probes.
//!
//! The oracle reads block counts off the kernel dimensions of powers of
//! `M - mu I` and never builds a chain, so it is independent of
//! [`crate::jordan`]. Every probe is deterministic in its seed.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::jordan::jordan_decompose;
use crate::linalg::{self, expm, svd, Tolerances};
use crate::matrix::{c64, dot, Matrix, C64};
use crate::positive_embed::{
    construct_positive_2x2, construct_unipotent3, decide_positive, decide_positive_2x2, metzler_log_candidates,
    necessary_battery, positive_flow_check, verification_grid,
};
use crate::real_embed::{chu_vandermonde_check, decide_real_embeddable, jordan_block_power, real_logarithm};
use crate::report::{Construction, EmbeddingCertificate, Verdict};

/// Summary of one property probe.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: String,
    pub trials: usize,
    pub failures: usize,
    pub worst_residual: f64,
    /// The first input that failed.
    pub counterexample: Option<Matrix>,
    /// What went wrong on the first failure.
    pub failure_note: Option<String>,
}

impl PropertyOutcome {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            trials: 0,
            failures: 0,
            worst_residual: 0.0,
            counterexample: None,
            failure_note: None,
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    fn trial(&mut self, residual: f64) {
        self.trials += 1;
        if residual > self.worst_residual || residual.is_nan() {
            self.worst_residual = residual;
        }
    }

    fn fail(&mut self, m: &Matrix, note: String) {
        self.failures += 1;
        if self.counterexample.is_none() {
            self.counterexample = Some(m.clone());
            self.failure_note = Some(note);
        }
    }
}

// ---------------------------------------------------------------------------
// Ensembles

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Largest accepted condition number of a random similarity.
pub const MAX_SIMILARITY_COND: f64 = 1e3;

/// Random real `n x n` matrix with entries in `[-1, 1]` and condition number
/// at most `max_cond` (by rejection).
pub fn random_similarity<R: Rng>(rng: &mut R, n: usize, max_cond: f64) -> Matrix {
    loop {
        let p = Matrix::from_fn(n, n, |_, _| c64(rng.gen_range(-1.0..1.0), 0.0));
        if linalg::condition_number(&p) <= max_cond {
            return p;
        }
    }
}

/// Complex counterpart of [`random_similarity`].
pub fn random_complex_similarity<R: Rng>(rng: &mut R, n: usize, max_cond: f64) -> Matrix {
    loop {
        let p = Matrix::from_fn(n, n, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        if linalg::condition_number(&p) <= max_cond {
            return p;
        }
    }
}

/// `P J P^-1`.
pub fn conjugate_by(p: &Matrix, j: &Matrix) -> Result<Matrix> {
    let pj = p.matmul(j);
    let strict = Tolerances { rank_tol: 1e-13, ..Tolerances::default() };
    Ok(linalg::solve(&p.transpose(), &pj.transpose(), &strict)?.transpose())
}

/// A block of a real Jordan form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    /// `J(lambda, d)` with real `lambda`.
    Real(f64, usize),
    /// Real `2d x 2d` block for the pair `a +- ib`, each with one block of
    /// dimension `d`.
    Pair { a: f64, b: f64, d: usize },
}

impl Piece {
    pub fn size(&self) -> usize {
        match *self {
            Piece::Real(_, d) => d,
            Piece::Pair { d, .. } => 2 * d,
        }
    }

    pub fn matrix(&self) -> Matrix {
        match *self {
            Piece::Real(l, d) => Matrix::jordan_block(c64(l, 0.0), d),
            Piece::Pair { a, b, d } => {
                let mut m = Matrix::zeros(2 * d, 2 * d);
                let c = Matrix::from_real_rows(&[[a, -b], [b, a]]);
                for k in 0..d {
                    m.set_block(2 * k, 2 * k, &c);
                    if k + 1 < d {
                        m.set_block(2 * k, 2 * k + 2, &Matrix::identity(2));
                    }
                }
                m
            }
        }
    }

    /// `(eigenvalue, dimension)` of the complex Jordan blocks.
    pub fn blocks(&self) -> Vec<(C64, usize)> {
        match *self {
            Piece::Real(l, d) => vec![(c64(l, 0.0), d)],
            Piece::Pair { a, b, d } => vec![(c64(a, b), d), (c64(a, -b), d)],
        }
    }
}

/// A matrix built from a known Jordan structure.
#[derive(Debug, Clone)]
pub struct JordanSample {
    pub matrix: Matrix,
    pub pieces: Vec<Piece>,
    pub transform: Matrix,
}

impl JordanSample {
    /// Expected block counts, keyed by eigenvalue.
    pub fn expected_counts(&self) -> Vec<(C64, BTreeMap<usize, usize>)> {
        let mut out: Vec<(C64, BTreeMap<usize, usize>)> = Vec::new();
        for p in &self.pieces {
            for (l, d) in p.blocks() {
                match out.iter_mut().find(|(m, _)| *m == l) {
                    Some((_, c)) => *c.entry(d).or_insert(0) += 1,
                    None => out.push((l, BTreeMap::from([(d, 1)]))),
                }
            }
        }
        out
    }
}

/// Minimum distance between distinct eigenvalues in the ensembles.
const SEPARATION: f64 = 0.3;
/// Largest algebraic multiplicity per eigenvalue in the ensembles.
const MAX_MULTIPLICITY: usize = 4;
/// Largest Jordan block in the ensembles.
const MAX_BLOCK: usize = 3;

struct Spectrum {
    /// Eigenvalue and its multiplicity so far.
    used: Vec<(C64, usize)>,
}

impl Spectrum {
    fn fresh(&self, z: C64) -> bool {
        self.used.iter().all(|(w, _)| (z - w).norm() >= SEPARATION)
    }

    fn add(&mut self, z: C64, m: usize) {
        match self.used.iter_mut().find(|(w, _)| *w == z) {
            Some((_, k)) => *k += m,
            None => self.used.push((z, m)),
        }
    }

    fn room(&self, z: C64) -> usize {
        MAX_MULTIPLICITY - self.used.iter().find(|(w, _)| *w == z).map_or(0, |(_, k)| *k)
    }
}

fn pick_real<R: Rng>(rng: &mut R, spectrum: &Spectrum, negative: bool, d: usize) -> Option<f64> {
    let sign = if negative { -1.0 } else { 1.0 };
    // Reuse an existing eigenvalue now and then so that multiplicities occur.
    if rng.gen_bool(0.3) {
        let candidates: Vec<f64> = spectrum
            .used
            .iter()
            .filter(|(w, k)| w.im == 0.0 && w.re * sign > 0.0 && k + d <= MAX_MULTIPLICITY)
            .map(|(w, _)| w.re)
            .collect();
        if !candidates.is_empty() {
            return Some(candidates[rng.gen_range(0..candidates.len())]);
        }
    }
    for _ in 0..64 {
        let l = sign * rng.gen_range(0.3..3.0);
        if spectrum.fresh(c64(l, 0.0)) {
            return Some(l);
        }
    }
    None
}

fn pick_pair<R: Rng>(rng: &mut R, spectrum: &Spectrum, imaginary: bool) -> Option<(f64, f64)> {
    for _ in 0..64 {
        let a = if imaginary { 0.0 } else { rng.gen_range(-2.5..2.5) };
        let b = rng.gen_range(0.3..2.5);
        if spectrum.fresh(c64(a, b)) && spectrum.fresh(c64(a, -b)) {
            return Some((a, b));
        }
    }
    None
}

/// Kinds of pieces an ensemble may draw.
#[derive(Debug, Clone, Copy)]
struct Mix {
    positive: bool,
    negative_single: bool,
    negative_pair: bool,
    complex: bool,
    imaginary: bool,
}

fn random_pieces<R: Rng>(rng: &mut R, n: usize, mix: Mix) -> Vec<Piece> {
    let mut spectrum = Spectrum { used: Vec::new() };
    let mut pieces = Vec::new();
    let mut used = 0;
    let mut stalls = 0;
    while used < n {
        let rem = n - used;
        let kind = rng.gen_range(0..5);
        let mut placed = false;
        match kind {
            0 if mix.positive || (!mix.negative_single && rem == 1) => {
                let d = rng.gen_range(1..=rem.min(MAX_BLOCK));
                if let Some(l) = pick_real(rng, &spectrum, false, d) {
                    if spectrum.room(c64(l, 0.0)) >= d {
                        spectrum.add(c64(l, 0.0), d);
                        pieces.push(Piece::Real(l, d));
                        used += d;
                        placed = true;
                    }
                }
            }
            1 if mix.negative_single => {
                let d = rng.gen_range(1..=rem.min(MAX_BLOCK));
                if let Some(l) = pick_real(rng, &spectrum, true, d) {
                    if spectrum.room(c64(l, 0.0)) >= d {
                        spectrum.add(c64(l, 0.0), d);
                        pieces.push(Piece::Real(l, d));
                        used += d;
                        placed = true;
                    }
                }
            }
            2 if mix.negative_pair && rem >= 2 => {
                let d = rng.gen_range(1..=(rem / 2).min(2));
                if let Some(l) = pick_real(rng, &spectrum, true, 2 * d) {
                    if spectrum.room(c64(l, 0.0)) >= 2 * d {
                        spectrum.add(c64(l, 0.0), 2 * d);
                        pieces.push(Piece::Real(l, d));
                        pieces.push(Piece::Real(l, d));
                        used += 2 * d;
                        placed = true;
                    }
                }
            }
            3 | 4 if (mix.complex || mix.imaginary) && rem >= 2 => {
                let d = rng.gen_range(1..=(rem / 2).min(2));
                let imaginary = mix.imaginary && (!mix.complex || kind == 4);
                if let Some((a, b)) = pick_pair(rng, &spectrum, imaginary) {
                    spectrum.add(c64(a, b), d);
                    spectrum.add(c64(a, -b), d);
                    pieces.push(Piece::Pair { a, b, d });
                    used += 2 * d;
                    placed = true;
                }
            }
            _ => {}
        }
        if !placed {
            stalls += 1;
            if stalls > 200 {
                // Fill the rest with fresh simple positive eigenvalues.
                let start = 4.0 + pieces.len() as f64;
                for k in 0..rem {
                    pieces.push(Piece::Real(start + k as f64, 1));
                }
                used = n;
            }
        }
    }
    pieces
}

fn assemble<R: Rng>(rng: &mut R, pieces: Vec<Piece>) -> Result<JordanSample> {
    let j = Matrix::block_diag(&pieces.iter().map(Piece::matrix).collect::<Vec<_>>());
    let p = random_similarity(rng, j.rows(), MAX_SIMILARITY_COND);
    let matrix = conjugate_by(&p, &j)?.real_part();
    Ok(JordanSample { matrix, pieces, transform: p })
}

/// Real-embeddable matrix of random size `1..=max_n`: positive blocks,
/// conjugate pairs and paired negative blocks under a real similarity.
pub fn random_real_embeddable<R: Rng>(rng: &mut R, max_n: usize) -> Result<JordanSample> {
    let n = rng.gen_range(1..=max_n);
    let mix = Mix { positive: true, negative_single: false, negative_pair: true, complex: true, imaginary: false };
    let pieces = random_pieces(rng, n, mix);
    assemble(rng, pieces)
}

/// Real matrix of random size `1..=max_n` with any nonzero real or
/// conjugate-pair spectrum, under a real similarity.
pub fn random_real_jordan<R: Rng>(rng: &mut R, max_n: usize) -> Result<JordanSample> {
    let n = rng.gen_range(1..=max_n);
    let mix = Mix { positive: true, negative_single: true, negative_pair: true, complex: true, imaginary: false };
    let pieces = random_pieces(rng, n, mix);
    assemble(rng, pieces)
}

/// Random Metzler matrix: off-diagonal entries in `[0, 1]`, diagonal in
/// `[-2, 0]`. With `reducible`, the block below a random split is zero.
pub fn random_metzler<R: Rng>(rng: &mut R, n: usize, reducible: bool) -> Matrix {
    let split = if reducible && n > 1 { rng.gen_range(1..n) } else { n };
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            c64(rng.gen_range(-2.0..0.0), 0.0)
        } else if i >= split && j < split {
            c64(0.0, 0.0)
        } else {
            c64(rng.gen_range(0.0..1.0), 0.0)
        }
    })
}

pub fn random_positive_2x2<R: Rng>(rng: &mut R) -> Matrix {
    Matrix::from_fn(2, 2, |_, _| c64(rng.gen_range(0.0..1.0), 0.0))
}

// ---------------------------------------------------------------------------
// Oracle

/// Number of Jordan blocks of one dimension at one eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCount {
    pub eigenvalue: C64,
    pub dimension: usize,
    pub count: usize,
}

/// Computed eigenvalues closer than this (relative to `1 + |lambda|`) are
/// treated as one eigenvalue by the oracle.
pub const ORACLE_RADIUS: f64 = 1e-2;

fn oracle_clusters(eigs: &[C64]) -> Vec<Vec<C64>> {
    let n = eigs.len();
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in (i + 1)..n {
            let r = ORACLE_RADIUS * (1.0 + eigs[i].norm().max(eigs[j].norm()));
            if (eigs[i] - eigs[j]).norm() <= r {
                let (a, b) = (label[i], label[j]);
                if a != b {
                    for l in label.iter_mut() {
                        if *l == b {
                            *l = a;
                        }
                    }
                }
            }
        }
    }
    let mut out: Vec<(usize, Vec<C64>)> = Vec::new();
    for (i, &l) in label.iter().enumerate() {
        match out.iter_mut().find(|(k, _)| *k == l) {
            Some((_, v)) => v.push(eigs[i]),
            None => out.push((l, vec![eigs[i]])),
        }
    }
    out.into_iter().map(|(_, v)| v).collect()
}

/// `dim ker (M - mu)^k` for `k = 0, 1, ...` until it stops growing, using
/// `ker B^k = ker((I - Q Q^*) B)` with `Q` an orthonormal basis of `ker B^(k-1)`.
pub fn oracle_kernel_dimensions(m: &Matrix, mu: C64, max_power: usize, tol: &Tolerances) -> Vec<usize> {
    let n = m.rows();
    let b = m.shift(mu);
    // Relative to ||M|| as well: when M is nearly mu I, B is pure roundoff.
    let cut = tol.rank_tol * svd(&b).largest().max(linalg::opnorm(m));
    let mut dims = vec![0];
    let mut q: Vec<Vec<C64>> = Vec::new();
    for _ in 0..max_power {
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
        let kernel: Vec<Vec<C64>> =
            (0..n).filter(|&j| s.singular_values[j] <= cut).map(|j| s.v.column(j)).collect();
        let dim = kernel.len();
        let last = *dims.last().unwrap_or(&0);
        dims.push(dim);
        q = kernel;
        if dim == last || dim == n {
            break;
        }
    }
    dims
}

/// Jordan block counts from kernel dimensions of powers alone.
pub fn oracle_jordan_structure(m: &Matrix, tol: &Tolerances) -> Result<Vec<OracleCount>> {
    let n = m.ensure_square()?;
    let eigs = linalg::eigenvalues(m)?;
    let mut out = Vec::new();
    for cluster in oracle_clusters(&eigs) {
        let mu = cluster.iter().sum::<C64>() / cluster.len() as f64;
        let mut w = oracle_kernel_dimensions(m, mu, cluster.len() + 1, tol);
        let top = *w.last().unwrap_or(&0);
        w.push(top);
        for d in 1..w.len() - 1 {
            let count = 2 * w[d] as i64 - w[d - 1] as i64 - w[d + 1] as i64;
            if count > 0 {
                out.push(OracleCount { eigenvalue: mu, dimension: d, count: count as usize });
            }
        }
    }
    let _ = n;
    Ok(out)
}

/// Counts at the oracle eigenvalue nearest to `lambda` (empty if none is
/// within the oracle radius).
pub fn oracle_counts_at(counts: &[OracleCount], lambda: C64) -> BTreeMap<usize, usize> {
    let r = 5.0 * ORACLE_RADIUS * (1.0 + lambda.norm());
    let near = counts
        .iter()
        .filter(|c| (c.eigenvalue - lambda).norm() <= r)
        .min_by(|a, b| (a.eigenvalue - lambda).norm().total_cmp(&(b.eigenvalue - lambda).norm()))
        .map(|c| c.eigenvalue);
    let mut map = BTreeMap::new();
    if let Some(mu) = near {
        for c in counts.iter().filter(|c| c.eigenvalue == mu) {
            *map.entry(c.dimension).or_insert(0) += c.count;
        }
    }
    map
}

fn merge(a: &BTreeMap<usize, usize>, b: &BTreeMap<usize, usize>) -> BTreeMap<usize, usize> {
    let mut out = a.clone();
    for (d, c) in b {
        *out.entry(*d).or_insert(0) += c;
    }
    out
}

fn describe(map: &BTreeMap<usize, usize>) -> String {
    format!("{map:?}")
}

// ---------------------------------------------------------------------------
// Probes

/// Oracle counts against the construction and against [`jordan_decompose`].
pub fn probe_jordan_oracle(trials: usize, max_dim: usize, seed: u64, tol: &Tolerances) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("jordan-oracle");
    let mut rng = seeded(seed);
    for _ in 0..trials {
        let sample = match random_real_jordan(&mut rng, max_dim) {
            Ok(s) => s,
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(&Matrix::zeros(0, 0), format!("ensemble: {e}"));
                continue;
            }
        };
        let m = &sample.matrix;
        let oracle = match oracle_jordan_structure(m, tol) {
            Ok(o) => o,
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(m, format!("oracle: {e}"));
                continue;
            }
        };
        let js = jordan_decompose(m, tol);
        let mut mismatch = None;
        for (lambda, expected) in sample.expected_counts() {
            let got = oracle_counts_at(&oracle, lambda);
            if got != expected {
                mismatch = Some(format!("oracle at {lambda}: {} vs construction {}", describe(&got), describe(&expected)));
                break;
            }
            match &js {
                Ok(js) => {
                    let from_jordan = js
                        .clusters
                        .iter()
                        .filter(|c| (c.eigenvalue - lambda).norm() <= 5.0 * ORACLE_RADIUS * (1.0 + lambda.norm()))
                        .min_by(|a, b| {
                            (a.eigenvalue - lambda).norm().total_cmp(&(b.eigenvalue - lambda).norm())
                        })
                        .map(|c| c.block_counts())
                        .unwrap_or_default();
                    if from_jordan != got {
                        mismatch = Some(format!(
                            "jordan at {lambda}: {} vs oracle {}",
                            describe(&from_jordan),
                            describe(&got)
                        ));
                        break;
                    }
                }
                Err(e) => {
                    mismatch = Some(format!("jordan_decompose: {e}"));
                    break;
                }
            }
        }
        out.trial(if mismatch.is_some() { 1.0 } else { 0.0 });
        if let Some(note) = mismatch {
            out.fail(m, note);
        }
    }
    out
}

/// Block counts of `S^2` at `lambda^2` against the counts of `S` at
/// `lambda` and `-lambda`, for `lambda != 0`.
pub fn probe_spectral_mapping(trials: usize, max_dim: usize, seed: u64, tol: &Tolerances) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("spectral-mapping");
    let mut rng = seeded(seed);
    let max_dim = max_dim.max(2);
    for _ in 0..trials {
        let complex = rng.gen_bool(0.5);
        let mag = rng.gen_range(0.5..2.0);
        let lambda = if complex {
            C64::from_polar(mag, rng.gen_range(0.3..2.8))
        } else {
            c64(if rng.gen_bool(0.5) { mag } else { -mag }, 0.0)
        };
        let n = rng.gen_range(2..=max_dim);
        let mut blocks: Vec<(C64, usize)> = Vec::new();
        let mut used = 0;
        let mut at = [0usize; 2];
        while used < n {
            let which = rng.gen_range(0..3);
            let d = rng.gen_range(1..=(n - used).min(MAX_BLOCK));
            let ev = match which {
                0 => lambda,
                1 => -lambda,
                // A distractor far from +-lambda whose square stays away too.
                _ => {
                    let mu = lambda * c64(0.0, 1.0) * 0.5 + c64(3.0, 0.0);
                    mu
                }
            };
            if which < 2 {
                if at[which] + d > MAX_MULTIPLICITY {
                    continue;
                }
                at[which] += d;
            }
            blocks.push((ev, d));
            used += d;
        }
        let j = Matrix::block_diag(&blocks.iter().map(|&(l, d)| Matrix::jordan_block(l, d)).collect::<Vec<_>>());
        let p = if complex {
            random_complex_similarity(&mut rng, n, MAX_SIMILARITY_COND)
        } else {
            random_similarity(&mut rng, n, MAX_SIMILARITY_COND)
        };
        let s = match conjugate_by(&p, &j) {
            Ok(s) => s,
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(&j, format!("similarity: {e}"));
                continue;
            }
        };
        let s2 = s.matmul(&s);
        let (os, os2) = match (oracle_jordan_structure(&s, tol), oracle_jordan_structure(&s2, tol)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => {
                out.trial(f64::INFINITY);
                out.fail(&s, format!("oracle: {e}"));
                continue;
            }
        };
        let lhs = oracle_counts_at(&os2, lambda * lambda);
        let rhs = merge(&oracle_counts_at(&os, lambda), &oracle_counts_at(&os, -lambda));
        let mut expected = BTreeMap::new();
        for &(l, d) in &blocks {
            if l == lambda || l == -lambda {
                *expected.entry(d).or_insert(0) += 1;
            }
        }
        let bad = lhs != rhs || rhs != expected;
        out.trial(if bad { 1.0 } else { 0.0 });
        if bad {
            out.fail(
                &s,
                format!(
                    "S^2 at lambda^2: {}, S at +-lambda: {}, built: {}",
                    describe(&lhs),
                    describe(&rhs),
                    describe(&expected)
                ),
            );
        }
    }
    out
}

/// `S^2` of a real `S` always passes the parity clause.
pub fn probe_parity_necessity(trials: usize, max_dim: usize, seed: u64, tol: &Tolerances) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("parity-necessity");
    let mut rng = seeded(seed);
    for trial in 0..trials {
        let n = rng.gen_range(1..=max_dim);
        let (s, t) = if trial % 2 == 0 {
            let s = Matrix::from_fn(n, n, |_, _| c64(rng.gen_range(-1.0..1.0), 0.0));
            let t = s.matmul(&s);
            (s, t)
        } else {
            let mix =
                Mix { positive: true, negative_single: true, negative_pair: false, complex: false, imaginary: true };
            let mut pieces = random_pieces(&mut rng, n, mix);
            // Squares of +-lambda coincide on purpose; squares of unrelated
            // eigenvalues must stay apart for the decision to be meaningful.
            separate_squares(&mut pieces);
            // S^2 is conjugated from J^2 directly; squaring S in floating
            // point costs eps ||S||^2, which can dwarf ||S^2||.
            let squared = assemble(&mut rng, pieces).and_then(|sample| {
                let j = Matrix::block_diag(&sample.pieces.iter().map(Piece::matrix).collect::<Vec<_>>());
                let t = conjugate_by(&sample.transform, &j.matmul(&j))?.real_part();
                Ok((sample.matrix, t))
            });
            match squared {
                Ok(pair) => pair,
                Err(e) => {
                    out.trial(f64::INFINITY);
                    out.fail(&Matrix::zeros(0, 0), format!("ensemble: {e}"));
                    continue;
                }
            }
        };
        match decide_real_embeddable(&t, tol) {
            Ok(r) => {
                let parity = r.conditions.iter().find(|c| c.name == "PARITY");
                let bad = parity.map_or(true, |c| c.violated());
                out.trial(if bad { 1.0 } else { 0.0 });
                if bad {
                    out.fail(&s, parity.map_or_else(|| "no parity clause".into(), |c| c.detail.clone()));
                }
            }
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(&s, format!("decide_real_embeddable(S^2): {e}"));
            }
        }
    }
    out
}

/// Moves real eigenvalues whose squares would collide with an unrelated
/// square (not `+-` the same value) out of the way.
fn separate_squares(pieces: &mut [Piece]) {
    let square = |p: &Piece| -> C64 {
        match *p {
            Piece::Real(l, _) => c64(l * l, 0.0),
            Piece::Pair { a, b, .. } => c64(a, b) * c64(a, b),
        }
    };
    for i in 0..pieces.len() {
        for j in 0..i {
            let (si, sj) = (square(&pieces[i]), square(&pieces[j]));
            let same_root = match (pieces[i], pieces[j]) {
                (Piece::Real(a, _), Piece::Real(b, _)) => a.abs() == b.abs(),
                (Piece::Pair { a, b, .. }, Piece::Pair { a: c, b: d, .. }) => a == c && b == d,
                _ => false,
            };
            if !same_root && (si - sj).norm() < SEPARATION {
                if let Piece::Real(l, d) = pieces[i] {
                    pieces[i] = Piece::Real(l.signum() * (l.abs() + 1.0 + j as f64), d);
                } else if let Piece::Real(l, d) = pieces[j] {
                    pieces[j] = Piece::Real(l.signum() * (l.abs() + 1.0 + i as f64), d);
                }
            }
        }
    }
}

/// `||e^A - T|| / ||T||` and `max |Im A| / ||A||` for Jordan-constructed
/// real-embeddable `T`.
pub fn probe_certificate_soundness(trials: usize, max_dim: usize, seed: u64, tol: &Tolerances) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("certificate-soundness");
    for_each_real_certificate(trials, max_dim, seed, tol, &mut out, |out, t, cert| {
        let a_norm = linalg::opnorm(&cert.generator);
        let imag = cert.generator.max_abs_imag();
        out.trial(cert.residual);
        if !(cert.residual <= 1e-8) || imag > 1e-8 * a_norm {
            out.fail(t, format!("residual {:e}, max |Im A| {:e}", cert.residual, imag));
        }
    });
    out
}

fn for_each_real_certificate(
    trials: usize,
    max_dim: usize,
    seed: u64,
    tol: &Tolerances,
    out: &mut PropertyOutcome,
    mut check: impl FnMut(&mut PropertyOutcome, &Matrix, &EmbeddingCertificate),
) {
    let mut rng = seeded(seed);
    for _ in 0..trials {
        let sample = match random_real_embeddable(&mut rng, max_dim) {
            Ok(s) => s,
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(&Matrix::zeros(0, 0), format!("ensemble: {e}"));
                continue;
            }
        };
        match real_logarithm(&sample.matrix, tol) {
            Ok(cert) => check(out, &sample.matrix, &cert),
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(&sample.matrix, format!("real_logarithm: {e}"));
            }
        }
    }
}

/// `||T(s+t) - T(s) T(t)|| <= 1e-7 e^{(s+t)||A||}` on the dyadic grid
/// `s, t in {k/16 : 0 <= k <= 32}`.
pub fn semigroup_law_residual(a: &Matrix) -> (f64, bool) {
    let a_norm = linalg::opnorm(a);
    let powers: Vec<Matrix> = (0..=64).map(|k| expm(&a.scale_real(k as f64 / 16.0))).collect();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for i in 0..=32 {
        for j in 0..=32 {
            let diff = linalg::opnorm(&(&powers[i + j] - &powers[i].matmul(&powers[j])));
            let bound = 1e-7 * ((i + j) as f64 / 16.0 * a_norm).exp();
            worst = worst.max(diff / bound);
            ok &= diff <= bound;
        }
    }
    (worst, ok)
}

/// Semigroup law for the certificates of [`probe_certificate_soundness`].
/// The residual reported is the worst ratio of error to bound.
pub fn probe_semigroup_law(trials: usize, max_dim: usize, seed: u64, tol: &Tolerances) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("semigroup-law");
    for_each_real_certificate(trials, max_dim, seed, tol, &mut out, |out, t, cert| {
        let (ratio, ok) = semigroup_law_residual(&cert.generator);
        out.trial(ratio);
        if !ok {
            out.fail(t, format!("error/bound ratio {ratio:e}"));
        }
    });
    out
}

fn is_positive_construction(c: Construction) -> bool {
    matches!(c, Construction::Metzler2x2 | Construction::Unipotent3 | Construction::MetzlerSearch)
}

/// Repeated squaring: `T(1/2^k)^(2^k)` against `T(1)` for `k <= depth`, and
/// a positive diagonal of `T(1/2^k)` for positive certificates.
pub fn probe_semigroup_consistency(cert: &EmbeddingCertificate, depth: u32) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("semigroup-consistency");
    let a = &cert.generator;
    let t1 = expm(a);
    let t_norm = linalg::opnorm(&t1).max(f64::MIN_POSITIVE);
    let slack = 1e-7 * (linalg::opnorm(a).exp() / t_norm).max(1.0);
    for k in 1..=depth.min(8) {
        let tk = expm(&a.scale_real(0.5f64.powi(k as i32)));
        let mut p = tk.clone();
        for _ in 0..k {
            p = p.matmul(&p);
        }
        let res = linalg::opnorm(&(&p - &t1)) / t_norm;
        out.trial(res);
        if !(res <= slack) {
            out.fail(a, format!("depth {k}: residual {res:e} > {slack:e}"));
        }
        if is_positive_construction(cert.construction) {
            if let Some(i) = (0..tk.rows()).find(|&i| !(tk[(i, i)].re > 0.0)) {
                out.fail(a, format!("depth {k}: diagonal entry {i} of T(1/2^k) is not positive"));
            }
        }
    }
    out
}

/// [`probe_semigroup_consistency`] over real and positive certificates.
pub fn probe_semigroup_consistency_suite(trials: usize, seed: u64, tol: &Tolerances) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("semigroup-consistency");
    let mut certs: Vec<EmbeddingCertificate> = Vec::new();
    let mut sink = PropertyOutcome::new("semigroup-consistency");
    for_each_real_certificate(trials, 8, seed, tol, &mut sink, |_, _, c| certs.push(c.clone()));
    let mut rng = seeded(seed ^ 0x5eed);
    for _ in 0..trials {
        let t = random_positive_2x2(&mut rng);
        if let Ok(c) = construct_positive_2x2(&t, tol) {
            certs.push(c);
        }
    }
    if let Ok(c) = construct_unipotent3(1.0, 1.0, 1.0, tol) {
        certs.push(c);
    }
    for c in &certs {
        let r = probe_semigroup_consistency(c, 6);
        absorb(&mut out, r);
    }
    absorb(&mut out, sink);
    out
}

fn absorb(into: &mut PropertyOutcome, from: PropertyOutcome) {
    into.trials += from.trials;
    into.failures += from.failures;
    if from.worst_residual > into.worst_residual || from.worst_residual.is_nan() {
        into.worst_residual = from.worst_residual;
    }
    if into.counterexample.is_none() {
        into.counterexample = from.counterexample;
        into.failure_note = from.failure_note;
    }
}

/// On random positive `2 x 2` matrices outside the boundary band: verdict
/// equals `det > 0`, and the branch search with bound 2 finds exactly one
/// Metzler generator, equal to the constructed one.
pub fn probe_two_by_two(trials: usize, seed: u64, tol: &Tolerances) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("two-by-two");
    let mut rng = seeded(seed);
    for _ in 0..trials {
        let t = random_positive_2x2(&mut rng);
        let det = t[(0, 0)].re * t[(1, 1)].re - t[(0, 1)].re * t[(1, 0)].re;
        let norm = linalg::opnorm(&t);
        if det.abs() <= tol.positivity_tol * norm * norm {
            continue;
        }
        let decision = match decide_positive_2x2(&t, tol) {
            Ok(d) => d,
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(&t, format!("decide_positive_2x2: {e}"));
                continue;
            }
        };
        if (decision.verdict == Verdict::Embeddable) != (det > 0.0) {
            out.trial(f64::INFINITY);
            out.fail(&t, format!("verdict {} with det {det:e}", decision.verdict.as_str()));
            continue;
        }
        if det <= 0.0 {
            out.trial(0.0);
            continue;
        }
        let built = match construct_positive_2x2(&t, tol) {
            Ok(c) => c.generator,
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(&t, format!("construct_positive_2x2: {e}"));
                continue;
            }
        };
        match metzler_log_candidates(&t, 2, tol) {
            Ok(Ok(found)) if found.len() == 1 => {
                let diff = (&found[0].generator - &built).max_abs();
                out.trial(diff);
                if !(diff <= 1e-8) {
                    out.fail(&t, format!("search and construction differ by {diff:e}"));
                }
            }
            Ok(Ok(found)) => {
                out.trial(f64::INFINITY);
                out.fail(&t, format!("{} surviving generators", found.len()));
            }
            Ok(Err(why)) => {
                out.trial(f64::INFINITY);
                out.fail(&t, format!("search did not run: {why}"));
            }
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(&t, format!("search: {e}"));
            }
        }
    }
    out
}

/// `e^{tA}` of random Metzler `A` is positive with positive diagonal on the
/// verification grid, and `e^A` passes the necessary battery.
pub fn probe_metzler_forward(trials: usize, max_dim: usize, seed: u64, tol: &Tolerances) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("metzler-forward");
    let mut rng = seeded(seed);
    for trial in 0..trials {
        let n = rng.gen_range(1..=max_dim);
        let a = random_metzler(&mut rng, n, trial % 2 == 1);
        let mut worst_negative: f64 = 0.0;
        let mut note = None;
        for s in verification_grid() {
            let ts = expm(&a.scale_real(s));
            worst_negative = worst_negative.max(-ts.min_real_entry());
            if ts.min_real_entry() < -1e-12 {
                note.get_or_insert_with(|| format!("t = {s}: entry {:e}", ts.min_real_entry()));
            }
            if let Some(i) = (0..n).find(|&i| !(ts[(i, i)].re > 0.0)) {
                note.get_or_insert_with(|| format!("t = {s}: diagonal entry {i} not positive"));
            }
        }
        match necessary_battery(&expm(&a), tol) {
            Ok(r) => {
                if let Some(c) = r.violations().next() {
                    note.get_or_insert_with(|| format!("battery rejects e^A: {} ({})", c.name, c.detail));
                }
            }
            Err(e) => {
                note.get_or_insert_with(|| format!("battery: {e}"));
            }
        }
        out.trial(worst_negative);
        if let Some(note) = note {
            out.fail(&a, note);
        }
    }
    out
}

/// Chu-Vandermonde for `j <= 12` at random `(t, s)` in `[-10, 10]^2`.
pub fn probe_chu_vandermonde(trials: usize, seed: u64) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("chu-vandermonde");
    let mut rng = seeded(seed);
    for _ in 0..trials {
        let t = rng.gen_range(-10.0..10.0);
        let s = rng.gen_range(-10.0..10.0);
        let worst = (0..=12).map(|j| chu_vandermonde_check(j, t, s)).fold(0.0, f64::max);
        out.trial(worst);
        if !(worst <= 1e-10) {
            out.fail(&Matrix::from_real_rows(&[[t, s]]), format!("residual {worst:e}"));
        }
    }
    out
}

/// `J(1, d)^(t+s) = J(1, d)^t J(1, d)^s` for `d <= 6` at random `(t, s)` in
/// `[-10, 10]^2`, relative to `max(1, ||P(t)|| ||P(s)||)`.
pub fn probe_block_power(trials: usize, seed: u64) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("block-power");
    let mut rng = seeded(seed);
    for _ in 0..trials {
        let t = rng.gen_range(-10.0..10.0);
        let s = rng.gen_range(-10.0..10.0);
        for d in 1..=6 {
            let res = (|| -> Result<f64> {
                let pt = jordan_block_power(1.0, d, t)?;
                let ps = jordan_block_power(1.0, d, s)?;
                let pts = jordan_block_power(1.0, d, t + s)?;
                let scale = (linalg::opnorm(&pt) * linalg::opnorm(&ps)).max(1.0);
                Ok(linalg::opnorm(&(&pts - &pt.matmul(&ps))) / scale)
            })();
            match res {
                Ok(r) => {
                    out.trial(r);
                    if !(r <= 1e-10) {
                        out.fail(&Matrix::from_real_rows(&[[t, s, d as f64]]), format!("residual {r:e}"));
                    }
                }
                Err(e) => {
                    out.trial(f64::INFINITY);
                    out.fail(&Matrix::from_real_rows(&[[t, s, d as f64]]), format!("{e}"));
                }
            }
        }
    }
    out
}

/// Positive certificates from every constructor: zeros of `T` stay zero and
/// reducing subspaces stay invariant along the verification grid.
pub fn probe_zero_pattern(trials: usize, seed: u64, tol: &Tolerances) -> PropertyOutcome {
    let mut out = PropertyOutcome::new("zero-pattern");
    let mut certs: Vec<(Matrix, EmbeddingCertificate)> = Vec::new();
    let mut rng = seeded(seed);

    for (a, b, c) in [(1.0, 1.0, 0.5), (1.0, 1.0, 1.0), (2.0, 0.5, 0.7), (0.0, 3.0, 0.0), (0.0, 0.0, 2.0)] {
        match construct_unipotent3(a, b, c, tol) {
            Ok(cert) => certs.push((crate::positive_embed::unipotent3(a, b, c), cert)),
            Err(e) => out.fail(&crate::positive_embed::unipotent3(a, b, c), format!("{e}")),
        }
    }
    for &(lambda, d) in &[(0.5, 1), (1.0, 2), (3.0, 2), (2.0, 1)] {
        let j = Matrix::jordan_block(c64(lambda, 0.0), d);
        push_decided(&mut out, &mut certs, &j, tol);
    }
    for _ in 0..trials {
        let t = random_positive_2x2(&mut rng);
        if rng.gen_bool(0.3) {
            // Triangular inputs exercise persistent zeros.
            let mut t = t;
            t[(1, 0)] = c64(0.0, 0.0);
            push_decided(&mut out, &mut certs, &t, tol);
        } else {
            push_decided(&mut out, &mut certs, &t, tol);
        }
        let n = rng.gen_range(1..=5);
        let a = random_metzler(&mut rng, n, true).scale_real(0.5);
        push_decided(&mut out, &mut certs, &expm(&a), tol);
    }

    let grid = verification_grid();
    for (t, cert) in &certs {
        match positive_flow_check(cert, &grid, tol) {
            Ok(f) => {
                out.trial(f.max_zero_entry.max(f.max_reducing_leak));
                let scale = t.max_abs().max(1.0);
                if !f.pattern_persists || !f.subspaces_invariant || f.min_entry < -tol.positivity_tol * scale {
                    out.fail(
                        t,
                        format!(
                            "min entry {:e}, zero entry {:e}, reducing leak {:e}",
                            f.min_entry, f.max_zero_entry, f.max_reducing_leak
                        ),
                    );
                }
            }
            Err(e) => {
                out.trial(f64::INFINITY);
                out.fail(t, format!("flow check: {e}"));
            }
        }
    }
    out
}

fn push_decided(
    out: &mut PropertyOutcome,
    certs: &mut Vec<(Matrix, EmbeddingCertificate)>,
    t: &Matrix,
    tol: &Tolerances,
) {
    match decide_positive(t, 2, tol) {
        Ok(d) => {
            if let Some(c) = d.certificate {
                certs.push((t.clone(), c));
            }
        }
        Err(Error::NotPositive { .. }) => {}
        Err(e) => {
            out.trial(f64::INFINITY);
            out.fail(t, format!("decide_positive: {e}"));
        }
    }
}

/// Names accepted by [`run_probe`], in suite order.
pub const PROBE_NAMES: [&str; 11] = [
    "jordan-oracle",
    "spectral-mapping",
    "parity-necessity",
    "certificate-soundness",
    "semigroup-law",
    "semigroup-consistency",
    "two-by-two",
    "metzler-forward",
    "chu-vandermonde",
    "block-power",
    "zero-pattern",
];

/// Default seed of the property suite.
pub const DEFAULT_SEED: u64 = 20240917;

/// Runs one named probe with its default trial count, or `trials` when
/// given. Each probe derives its own seed from `seed`.
pub fn run_probe(name: &str, seed: u64, trials: Option<usize>, tol: &Tolerances) -> Result<PropertyOutcome> {
    let pos = PROBE_NAMES
        .iter()
        .position(|p| *p == name)
        .ok_or_else(|| Error::Domain(format!("unknown probe {name:?}")))?;
    let seed = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(pos as u64);
    let n = |default: usize| trials.unwrap_or(default);
    Ok(match name {
        "jordan-oracle" => probe_jordan_oracle(n(1000), 6, seed, tol),
        "spectral-mapping" => probe_spectral_mapping(n(1000), 6, seed, tol),
        "parity-necessity" => probe_parity_necessity(n(1000), 6, seed, tol),
        "certificate-soundness" => probe_certificate_soundness(n(500), 8, seed, tol),
        "semigroup-law" => probe_semigroup_law(n(500), 8, seed, tol),
        "semigroup-consistency" => probe_semigroup_consistency_suite(n(100), seed, tol),
        "two-by-two" => probe_two_by_two(n(10_000), seed, tol),
        "metzler-forward" => probe_metzler_forward(n(500), 8, seed, tol),
        "chu-vandermonde" => probe_chu_vandermonde(n(1000), seed),
        "block-power" => probe_block_power(n(1000), seed),
        _ => probe_zero_pattern(n(300), seed, tol),
    })
}

pub fn run_suite(seed: u64, trials: Option<usize>, tol: &Tolerances) -> Result<Vec<PropertyOutcome>> {
    PROBE_NAMES.iter().map(|p| run_probe(p, seed, trials, tol)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn counts(m: &Matrix, lambda: C64) -> BTreeMap<usize, usize> {
        oracle_counts_at(&oracle_jordan_structure(m, &tol()).unwrap(), lambda)
    }

    #[test]
    fn oracle_examples() {
        let m = Matrix::block_diag(&[Matrix::jordan_block(c64(2.0, 0.0), 2), Matrix::jordan_block(c64(2.0, 0.0), 1)]);
        assert_eq!(counts(&m, c64(2.0, 0.0)), BTreeMap::from([(1, 1), (2, 1)]));

        let nil = Matrix::from_real_rows(&[[0.0, 1.0], [0.0, 0.0]]);
        assert_eq!(counts(&nil, c64(0.0, 0.0)), BTreeMap::from([(2, 1)]));
        assert_eq!(counts(&nil.matmul(&nil), c64(0.0, 0.0)), BTreeMap::from([(1, 2)]));

        let mut rng = seeded(7);
        let j = Matrix::block_diag(&[
            Matrix::jordan_block(c64(-1.0, 0.0), 2),
            Matrix::jordan_block(c64(-1.0, 0.0), 2),
        ]);
        let p = random_similarity(&mut rng, 4, MAX_SIMILARITY_COND);
        let m = conjugate_by(&p, &j).unwrap();
        assert_eq!(counts(&m, c64(-1.0, 0.0)), BTreeMap::from([(2, 2)]));
    }

    #[test]
    fn spectral_mapping_examples() {
        let s = Matrix::from_real_rows(&[[0.0, 1.0], [-1.0, 0.0]]);
        let s2 = s.matmul(&s);
        let at_i = counts(&s, c64(0.0, 1.0));
        let at_minus_i = counts(&s, c64(0.0, -1.0));
        assert_eq!(counts(&s2, c64(-1.0, 0.0)), merge(&at_i, &at_minus_i));

        let j = Matrix::jordan_block(c64(2.0, 0.0), 3);
        assert_eq!(counts(&j.matmul(&j), c64(4.0, 0.0)), BTreeMap::from([(3, 1)]));
    }

    #[test]
    fn ensembles_are_deterministic_and_conditioned() {
        let a = random_real_embeddable(&mut seeded(3), 8).unwrap();
        let b = random_real_embeddable(&mut seeded(3), 8).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert!(linalg::condition_number(&a.transform) <= MAX_SIMILARITY_COND);
        let n: usize = a.pieces.iter().map(Piece::size).sum();
        assert_eq!(n, a.matrix.rows());
    }

    #[test]
    fn small_probes_pass() {
        let t = tol();
        for name in PROBE_NAMES {
            let r = run_probe(name, DEFAULT_SEED, Some(20), &t).unwrap();
            assert!(r.passed(), "{name}: {:?}", r.failure_note);
        }
    }

    #[test]
    fn consistency_examples() {
        let zero = EmbeddingCertificate {
            generator: Matrix::zeros(2, 2),
            residual: 0.0,
            branch_log: Vec::new(),
            construction: Construction::JordanLog,
        };
        let r = probe_semigroup_consistency(&zero, 8);
        assert!(r.passed() && r.worst_residual == 0.0);

        let c = construct_positive_2x2(&Matrix::from_real_rows(&[[2.0, 1.0], [1.0, 2.0]]), &tol()).unwrap();
        let r = probe_semigroup_consistency(&c, 6);
        assert!(r.passed() && r.worst_residual <= 1e-9);

        let c = construct_unipotent3(1.0, 1.0, 1.0, &tol()).unwrap();
        assert!(probe_semigroup_consistency(&c, 6).passed());
    }

    #[test]
    fn loose_rank_tolerance_is_detected() {
        let bad = Tolerances { rank_tol: 0.5, ..tol() };
        let r = run_probe("jordan-oracle", DEFAULT_SEED, Some(30), &bad).unwrap();
        assert!(r.failures > 0);
    }
}
