//! Acceptance suite. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p matembed-core --test acceptance -- --nocapture` to see them.

use matembed_core::positive_embed::{decide_positive, decide_unipotent3, positive_sqrt_unipotent3};
use matembed_core::real_embed::{decide_real_embeddable, real_logarithm};
use matembed_core::verify::{oracle_counts_at, oracle_jordan_structure, run_probe, PropertyOutcome, DEFAULT_SEED};
use matembed_core::{Matrix, Tolerances, Verdict, C64};

const RESIDUAL_TOL: f64 = 1e-8;
const IMAG_TOL: f64 = 1e-8;
const SEMIGROUP_SLACK: f64 = 1e-7;
const GENERATOR_MATCH_TOL: f64 = 1e-8;
const THRESHOLD_STEP: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-10;
const ZERO_TOL: f64 = 1e-12;

fn tol() -> Tolerances {
    Tolerances::default()
}

fn report(label: &str, failures: &[String]) {
    if failures.is_empty() {
        println!("PASS  {label}");
    } else {
        println!("FAIL  {label}: {}", failures.join("; "));
    }
    assert!(failures.is_empty(), "{label}: {failures:?}");
}

fn probe(name: &str) -> PropertyOutcome {
    run_probe(name, DEFAULT_SEED, None, &tol()).unwrap()
}

fn summarize(p: &PropertyOutcome, min_trials: usize, worst_limit: f64, failures: &mut Vec<String>) {
    if p.trials < min_trials {
        failures.push(format!("{}: only {} trials", p.name, p.trials));
    }
    if p.failures > 0 {
        failures.push(format!("{}: {} failures, first: {:?}", p.name, p.failures, p.failure_note));
    }
    if !(p.worst_residual <= worst_limit) {
        failures.push(format!("{}: worst residual {:e} above {:e}", p.name, p.worst_residual, worst_limit));
    }
}

fn real(rows: &[&[f64]]) -> Matrix {
    let n = rows.len();
    Matrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0))
}

#[test]
fn worked_examples() {
    let tol = tol();
    let mut failures = Vec::new();

    let r = decide_real_embeddable(&real(&[&[-1.0]]), &tol).unwrap();
    if r.verdict != Verdict::NotEmbeddable {
        failures.push(format!("[[-1]]: {}", r.verdict.as_str()));
    }
    let d = real(&[&[-1.0, 0.0], &[0.0, -1.0]]);
    let r = decide_real_embeddable(&d, &tol).unwrap();
    if r.verdict != Verdict::Embeddable {
        failures.push(format!("diag(-1,-1): {}", r.verdict.as_str()));
    }
    match real_logarithm(&d, &tol) {
        Ok(c) if c.residual <= RESIDUAL_TOL => {}
        Ok(c) => failures.push(format!("diag(-1,-1): residual {:e}", c.residual)),
        Err(e) => failures.push(format!("diag(-1,-1): {e}")),
    }

    for t in [real(&[&[0.0, 1.0], &[1.0, 0.0]]), real(&[&[0.5, 0.5], &[1.0, 0.0]])] {
        let p = decide_positive(&t, 2, &tol).unwrap();
        let cites_diagonal = p.violations().any(|c| c.name == "N1");
        if p.verdict != Verdict::NotEmbeddable || !cites_diagonal {
            failures.push(format!("{:?}: {} without N1", t.to_real_rows(), p.verdict.as_str()));
        }
    }

    for lambda in [0.5, 1.0, 3.0] {
        for d in 1..=4 {
            let j = Matrix::jordan_block(C64::new(lambda, 0.0), d);
            let p = decide_positive(&j, 2, &tol).unwrap();
            let expected = if d <= 2 { Verdict::Embeddable } else { Verdict::NotEmbeddable };
            if p.verdict != expected {
                failures.push(format!("J({lambda},{d}): {}", p.verdict.as_str()));
            }
        }
    }

    for (a, b) in [(1.0, 1.0), (2.0, 0.5), (0.0, 3.0)] {
        let half = a * b / 2.0;
        let above = decide_unipotent3(a, b, half + THRESHOLD_STEP, &tol).unwrap().verdict;
        if above != Verdict::Embeddable {
            failures.push(format!("unipotent ({a},{b}) just above ab/2: {}", above.as_str()));
        }
        if half - THRESHOLD_STEP >= 0.0 {
            let below = decide_unipotent3(a, b, half - THRESHOLD_STEP, &tol).unwrap().verdict;
            if below != Verdict::NotEmbeddable {
                failures.push(format!("unipotent ({a},{b}) just below ab/2: {}", below.as_str()));
            }
        }
        let quarter = a * b / 4.0;
        if positive_sqrt_unipotent3(a, b, quarter + THRESHOLD_STEP, &tol).is_none() {
            failures.push(format!("unipotent ({a},{b}) just above ab/4 has no positive root"));
        }
        if quarter - THRESHOLD_STEP >= 0.0 && positive_sqrt_unipotent3(a, b, quarter - THRESHOLD_STEP, &tol).is_some() {
            failures.push(format!("unipotent ({a},{b}) just below ab/4 has a positive root"));
        }
    }
    report("worked examples", &failures);
}

#[test]
fn certificate_soundness() {
    let p = probe("certificate-soundness");
    let mut failures = Vec::new();
    summarize(&p, 500, RESIDUAL_TOL.min(IMAG_TOL), &mut failures);
    report(&format!("certificate soundness ({} trials, worst residual {:e})", p.trials, p.worst_residual), &failures);
}

#[test]
fn semigroup_law() {
    // The probe reports error / (1e-7 e^{(s+t)||A||}), so the limit is 1.
    let law = probe("semigroup-law");
    let consistency = probe("semigroup-consistency");
    let mut failures = Vec::new();
    summarize(&law, 500, 1.0, &mut failures);
    summarize(&consistency, 1, f64::INFINITY, &mut failures);
    report(
        &format!(
            "semigroup law ({} certificates, worst error/({SEMIGROUP_SLACK:e} e^((s+t)|A|)) {:e})",
            law.trials, law.worst_residual
        ),
        &failures,
    );
}

#[test]
fn two_by_two_equivalence_and_uniqueness() {
    let p = probe("two-by-two");
    let mut failures = Vec::new();
    // Trials inside the boundary band are skipped, so allow a few.
    summarize(&p, 9_900, GENERATOR_MATCH_TOL, &mut failures);
    report(&format!("2x2 equivalence and uniqueness ({} trials, worst mismatch {:e})", p.trials, p.worst_residual), &failures);
}

#[test]
fn spectral_mapping() {
    let tol = tol();
    let p = probe("spectral-mapping");
    let mut failures = Vec::new();
    summarize(&p, 1000, 0.0, &mut failures);

    let s = real(&[&[0.0, 1.0], &[0.0, 0.0]]);
    let counts = oracle_counts_at(&oracle_jordan_structure(&s.matmul(&s), &tol).unwrap(), C64::new(0.0, 0.0));
    if counts.into_iter().collect::<Vec<_>>() != vec![(1, 2)] {
        failures.push("S = [[0,1],[0,0]]: S^2 should have two blocks of dimension 1 at 0".into());
    }
    report(&format!("spectral mapping ({} trials)", p.trials), &failures);
}

#[test]
fn parity_necessity() {
    let p = probe("parity-necessity");
    let mut failures = Vec::new();
    summarize(&p, 1000, 0.0, &mut failures);
    report(&format!("parity necessity ({} trials)", p.trials), &failures);
}

#[test]
fn metzler_forward_direction() {
    let p = probe("metzler-forward");
    let mut failures = Vec::new();
    summarize(&p, 500, ZERO_TOL, &mut failures);
    report(&format!("Metzler forward direction ({} generators, worst negative entry {:e})", p.trials, p.worst_residual), &failures);
}

#[test]
fn chu_vandermonde_and_block_power() {
    let cv = probe("chu-vandermonde");
    let bp = probe("block-power");
    let mut failures = Vec::new();
    summarize(&cv, 1000, IDENTITY_TOL, &mut failures);
    summarize(&bp, 1000, IDENTITY_TOL, &mut failures);
    report(
        &format!("Chu-Vandermonde (worst {:e}) and block power (worst {:e})", cv.worst_residual, bp.worst_residual),
        &failures,
    );
}

#[test]
fn zero_pattern_persistence() {
    let p = probe("zero-pattern");
    let mut failures = Vec::new();
    summarize(&p, 1, ZERO_TOL, &mut failures);
    report(&format!("zero-pattern persistence ({} certificates, worst leak {:e})", p.trials, p.worst_residual), &failures);
}

#[test]
fn default_tolerances() {
    let t = tol();
    let pinned = Tolerances { rank_tol: 1e-10, eig_cluster_tol: 1e-8, verify_tol: 1e-8, positivity_tol: 1e-12 };
    let mut failures = Vec::new();
    if t != pinned {
        failures.push(format!("{t:?}"));
    }
    report("default tolerances", &failures);
}
