use std::fmt::Write as _;
use std::time::Instant;

use matembed_core::positive_embed::decide_positive;
use matembed_core::real_embed::{decide_real_embeddable, real_logarithm, real_square_root, sample_semigroup};
use matembed_core::verify::{run_probe, run_suite};
use matembed_core::{ConditionStatus, EmbeddingCertificate, Error, Tolerances, Verdict};

use crate::document::{clean, MatrixDocument, ParseError};
use crate::report::{square_root_entry, ConditionEntry, ProbeEntry, ReportDocument, Timing, VerifyDocument, TOOL};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Yes = 0,
    No = 1,
    Parse = 2,
    Internal = 3,
    Undecided = 4,
}

impl Exit {
    fn of(v: Verdict) -> Self {
        match v {
            Verdict::Embeddable => Exit::Yes,
            Verdict::NotEmbeddable => Exit::No,
            Verdict::Undecided => Exit::Undecided,
        }
    }
}

const CITE_NONNEGATIVE: &str = "every member of a positive semigroup is entrywise nonnegative";

fn elapsed(start: Instant) -> Timing {
    Timing { elapsed_ms: start.elapsed().as_secs_f64() * 1e3 }
}

fn fail(mut report: ReportDocument, e: Error, start: Instant) -> (ReportDocument, Exit) {
    report.verdict = "ERROR";
    report.error = Some(e.to_string());
    report.timing = elapsed(start);
    (report, Exit::Internal)
}

pub fn check_real(doc: &MatrixDocument, tol: &Tolerances) -> (ReportDocument, Exit) {
    let start = Instant::now();
    let mut report = ReportDocument::new("check-real", doc, tol);
    let t = doc.matrix();
    let decision = match decide_real_embeddable(&t, tol) {
        Ok(d) => d,
        Err(e) => return fail(report, e, start),
    };
    report.verdict = decision.verdict.as_str();
    report.conditions = decision.conditions.iter().map(ConditionEntry::from).collect();
    report.negative_blocks = decision.negative_blocks.iter().map(Into::into).collect();
    if decision.is_yes() {
        match real_logarithm(&t, tol) {
            Ok(cert) => report.certificate = Some((&cert).into()),
            Err(e) => return fail(report, e, start),
        }
    }
    report.timing = elapsed(start);
    (report, Exit::of(decision.verdict))
}

pub fn check_positive(doc: &MatrixDocument, branch_bound: u32, tol: &Tolerances) -> (ReportDocument, Exit) {
    let start = Instant::now();
    let mut report = ReportDocument::new("check-positive", doc, tol);
    let t = doc.matrix();
    let decision = match decide_positive(&t, branch_bound, tol) {
        Ok(d) => d,
        Err(Error::NotPositive { min_entry }) => {
            report.verdict = Verdict::NotEmbeddable.as_str();
            report.conditions.push(ConditionEntry {
                name: "NONNEGATIVE",
                status: ConditionStatus::Violated.as_str(),
                citation: CITE_NONNEGATIVE,
                detail: format!("minimum entry {min_entry:e} is below -{:e}", tol.positivity_tol),
            });
            report.timing = elapsed(start);
            return (report, Exit::No);
        }
        Err(e) => return fail(report, e, start),
    };
    report.verdict = decision.verdict.as_str();
    report.conditions = decision.reasons.iter().map(ConditionEntry::from).collect();
    report.certificate = decision.certificate.as_ref().map(Into::into);
    report.timing = elapsed(start);
    (report, Exit::of(decision.verdict))
}

/// For invertible real `T` a real square root exists exactly when `T` is
/// real embeddable. Singular input is left undecided.
pub fn sqrt_real(doc: &MatrixDocument, tol: &Tolerances) -> (ReportDocument, Exit) {
    let start = Instant::now();
    let mut report = ReportDocument::new("sqrt-real", doc, tol);
    let t = doc.matrix();
    let decision = match decide_real_embeddable(&t, tol) {
        Ok(d) => d,
        Err(e) => return fail(report, e, start),
    };
    report.conditions = decision.conditions.iter().map(ConditionEntry::from).collect();
    report.negative_blocks = decision.negative_blocks.iter().map(Into::into).collect();
    let singular = decision.conditions.iter().any(|c| c.name == "INVERTIBLE" && c.violated());
    let verdict = if singular { Verdict::Undecided } else { decision.verdict };
    report.verdict = verdict.as_str();
    if verdict == Verdict::Embeddable {
        let cert = match real_logarithm(&t, tol) {
            Ok(c) => c,
            Err(e) => return fail(report, e, start),
        };
        match real_square_root(&t, tol) {
            Ok(s) => report.square_root = Some(square_root_entry(&s, &t.real_part())),
            Err(e) => return fail(report, e, start),
        }
        report.certificate = Some((&cert).into());
    }
    report.timing = elapsed(start);
    (report, Exit::of(verdict))
}

pub enum SampleOutcome {
    Csv(String),
    Refused(Box<ReportDocument>, Exit),
}

/// `t_k = t_min + k (t_max - t_min) / (steps - 1)`.
pub fn sample_grid(t_min: f64, t_max: f64, steps: usize) -> Result<Vec<f64>, ParseError> {
    if steps < 2 {
        return Err(ParseError(format!("--steps must be at least 2, got {steps}")));
    }
    if !(t_min.is_finite() && t_max.is_finite()) || t_max < t_min {
        return Err(ParseError(format!("invalid time range [{t_min}, {t_max}]")));
    }
    let h = (t_max - t_min) / (steps - 1) as f64;
    Ok((0..steps).map(|k| if k == steps - 1 { t_max } else { t_min + k as f64 * h }).collect())
}

pub fn sample(
    doc: &MatrixDocument,
    grid: &[f64],
    positive: Option<u32>,
    tol: &Tolerances,
) -> SampleOutcome {
    let (report, exit) = match positive {
        Some(bound) => check_positive(doc, bound, tol),
        None => check_real(doc, tol),
    };
    if exit != Exit::Yes {
        return SampleOutcome::Refused(Box::new(report), exit);
    }
    let t = doc.matrix();
    let cert: Option<EmbeddingCertificate> = match positive {
        Some(bound) => decide_positive(&t, bound, tol).ok().and_then(|d| d.certificate),
        None => real_logarithm(&t, tol).ok(),
    };
    let Some(cert) = cert else {
        return SampleOutcome::Refused(Box::new(report), Exit::Internal);
    };
    let trajectory = match sample_semigroup(&cert, grid) {
        Ok(s) => s,
        Err(e) => {
            let start = Instant::now();
            let (r, x) = fail(report, e, start);
            return SampleOutcome::Refused(Box::new(r), x);
        }
    };
    let mut csv = String::from("t,i,j,re,im\n");
    for (s, m) in &trajectory.points {
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                let z = m[(i, j)];
                let _ = writeln!(csv, "{},{i},{j},{},{}", clean(*s), clean(z.re), clean(z.im));
            }
        }
    }
    SampleOutcome::Csv(csv)
}

pub fn verify(seed: u64, probe: Option<&str>, trials: Option<usize>, tol: &Tolerances) -> Result<(VerifyDocument, Exit), ParseError> {
    let start = Instant::now();
    let outcomes = match probe {
        Some(name) => vec![run_probe(name, seed, trials, tol).map_err(|e| ParseError(e.to_string()))?],
        None => run_suite(seed, trials, tol).map_err(|e| ParseError(e.to_string()))?,
    };
    let passed = outcomes.iter().all(|p| p.passed());
    let doc = VerifyDocument {
        tool: TOOL,
        analysis: "verify",
        seed,
        tolerances: tol.into(),
        passed,
        probes: outcomes.iter().map(ProbeEntry::from).collect(),
        timing: elapsed(start),
    };
    Ok((doc, if passed { Exit::Yes } else { Exit::No }))
}
