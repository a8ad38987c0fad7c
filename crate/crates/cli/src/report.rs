//! Output documents. Everything except `timing` is a deterministic function
//! of the input document, the flags and the seed.

use matembed_core::report::BlockParity;
use matembed_core::verify::PropertyOutcome;
use matembed_core::{Condition, EmbeddingCertificate, Matrix, Tolerances, C64};
use serde::Serialize;

use crate::document::{clean, entries_of, Entry, MatrixDocument};

#[derive(Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

pub const TOOL: Tool = Tool { name: "matembed", version: env!("CARGO_PKG_VERSION") };

#[derive(Debug, Serialize)]
pub struct ToleranceEcho {
    pub rank_tol: f64,
    pub eig_tol: f64,
    pub verify_tol: f64,
    pub pos_tol: f64,
}

impl From<&Tolerances> for ToleranceEcho {
    fn from(t: &Tolerances) -> Self {
        Self { rank_tol: t.rank_tol, eig_tol: t.eig_cluster_tol, verify_tol: t.verify_tol, pos_tol: t.positivity_tol }
    }
}

#[derive(Debug, Serialize)]
pub struct ConditionEntry {
    pub name: &'static str,
    pub status: &'static str,
    pub citation: &'static str,
    pub detail: String,
}

impl From<&Condition> for ConditionEntry {
    fn from(c: &Condition) -> Self {
        Self { name: c.name, status: c.status.as_str(), citation: c.citation, detail: c.detail.clone() }
    }
}

#[derive(Debug, Serialize)]
pub struct BlockCount {
    pub eigenvalue: [f64; 2],
    pub dimension: usize,
    pub count: usize,
    pub even: bool,
}

impl From<&BlockParity> for BlockCount {
    fn from(b: &BlockParity) -> Self {
        Self { eigenvalue: pair(b.eigenvalue), dimension: b.dimension, count: b.count, even: b.even }
    }
}

#[derive(Debug, Serialize)]
pub struct BranchIndex {
    pub eigenvalue: [f64; 2],
    pub branch: i64,
}

#[derive(Debug, Serialize)]
pub struct CertificateEntry {
    pub construction: &'static str,
    pub generator: Vec<Vec<Entry>>,
    pub residual: f64,
    pub branch_indices: Vec<BranchIndex>,
}

impl From<&EmbeddingCertificate> for CertificateEntry {
    fn from(c: &EmbeddingCertificate) -> Self {
        Self {
            construction: c.construction.as_str(),
            generator: entries_of(&c.generator),
            residual: c.residual,
            branch_indices: c.branch_log.iter().map(|&(z, k)| BranchIndex { eigenvalue: pair(z), branch: k }).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SquareRootEntry {
    pub entries: Vec<Vec<Entry>>,
    /// `||S^2 - T|| / ||T||`.
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct Timing {
    pub elapsed_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct ReportDocument {
    pub tool: Tool,
    pub analysis: &'static str,
    pub input: MatrixDocument,
    pub tolerances: ToleranceEcho,
    pub verdict: &'static str,
    pub conditions: Vec<ConditionEntry>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub negative_blocks: Vec<BlockCount>,
    pub certificate: Option<CertificateEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub square_root: Option<SquareRootEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub timing: Timing,
}

impl ReportDocument {
    pub fn new(analysis: &'static str, input: &MatrixDocument, tol: &Tolerances) -> Self {
        Self {
            tool: TOOL,
            analysis,
            input: input.clone(),
            tolerances: tol.into(),
            verdict: "UNDECIDED",
            conditions: Vec::new(),
            negative_blocks: Vec::new(),
            certificate: None,
            square_root: None,
            error: None,
            timing: Timing { elapsed_ms: 0.0 },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct ProbeEntry {
    pub name: String,
    pub passed: bool,
    pub trials: usize,
    pub failures: usize,
    pub worst_residual: Number,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_note: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Vec<Vec<Entry>>>,
}

impl From<&PropertyOutcome> for ProbeEntry {
    fn from(p: &PropertyOutcome) -> Self {
        Self {
            name: p.name.clone(),
            passed: p.passed(),
            trials: p.trials,
            failures: p.failures,
            worst_residual: Number::from(p.worst_residual),
            failure_note: p.failure_note.clone(),
            counterexample: p.counterexample.as_ref().filter(|_| p.failures > 0).map(entries_of),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct VerifyDocument {
    pub tool: Tool,
    pub analysis: &'static str,
    pub seed: u64,
    pub tolerances: ToleranceEcho,
    pub passed: bool,
    pub probes: Vec<ProbeEntry>,
    pub timing: Timing,
}

/// JSON has no infinities; those are written as strings.
#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Number {
    Finite(f64),
    Special(&'static str),
}

impl From<f64> for Number {
    fn from(x: f64) -> Self {
        if x.is_finite() {
            Number::Finite(clean(x))
        } else if x.is_nan() {
            Number::Special("nan")
        } else if x > 0.0 {
            Number::Special("inf")
        } else {
            Number::Special("-inf")
        }
    }
}

pub fn pair(z: C64) -> [f64; 2] {
    [clean(z.re), clean(z.im)]
}

pub fn square_root_entry(s: &Matrix, t: &Matrix) -> SquareRootEntry {
    let res = matembed_core::linalg::opnorm(&(&s.matmul(s) - t))
        / matembed_core::linalg::opnorm(t).max(f64::MIN_POSITIVE);
    SquareRootEntry { entries: entries_of(s), residual: res }
}
