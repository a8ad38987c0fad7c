//! Result types shared by the decision procedures.

use alloc::string::String;
use alloc::vec::Vec;

use crate::matrix::{Matrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Embeddable,
    NotEmbeddable,
    /// The procedure could neither construct a generator nor refute one.
    Undecided,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Embeddable => "EMBEDDABLE",
            Verdict::NotEmbeddable => "NOT_EMBEDDABLE",
            Verdict::Undecided => "UNDECIDED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditionStatus {
    Satisfied,
    Violated,
    /// Within tolerance of a sharp threshold.
    Boundary,
    NotApplicable,
}

impl ConditionStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ConditionStatus::Satisfied => "satisfied",
            ConditionStatus::Violated => "violated",
            ConditionStatus::Boundary => "boundary",
            ConditionStatus::NotApplicable => "not_applicable",
        }
    }
}

/// A named condition that was evaluated while deciding.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    /// Stable identifier such as `N1`, `PARITY` or `INVERTIBLE`.
    pub name: &'static str,
    /// The mathematical fact the condition comes from.
    pub citation: &'static str,
    pub status: ConditionStatus,
    pub detail: String,
}

impl Condition {
    pub fn new(name: &'static str, citation: &'static str, status: ConditionStatus, detail: String) -> Self {
        Self { name, citation, status, detail }
    }

    pub fn violated(&self) -> bool {
        self.status == ConditionStatus::Violated
    }
}

/// Jordan-block count at one eigenvalue and dimension, with its parity.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockParity {
    pub eigenvalue: C64,
    pub dimension: usize,
    pub count: usize,
    pub even: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionReport {
    pub verdict: Verdict,
    pub conditions: Vec<Condition>,
    /// Block counts at negative eigenvalues (real embeddability only).
    pub negative_blocks: Vec<BlockParity>,
    /// Condition number of the Jordan transform, when one was computed.
    pub jordan_condition: Option<f64>,
}

impl DecisionReport {
    pub fn violations(&self) -> impl Iterator<Item = &Condition> {
        self.conditions.iter().filter(|c| c.violated())
    }

    pub fn is_yes(&self) -> bool {
        self.verdict == Verdict::Embeddable
    }
}

/// How a generator was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Construction {
    JordanLog,
    PairedNegativeBlocks,
    Metzler2x2,
    Unipotent3,
    MetzlerSearch,
}

impl Construction {
    pub fn as_str(self) -> &'static str {
        match self {
            Construction::JordanLog => "jordan_log",
            Construction::PairedNegativeBlocks => "paired_negative_blocks",
            Construction::Metzler2x2 => "metzler_2x2",
            Construction::Unipotent3 => "unipotent3",
            Construction::MetzlerSearch => "metzler_search",
        }
    }
}

/// A generator `A` together with the evidence that `e^A = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCertificate {
    pub generator: Matrix,
    /// `||e^A - T|| / ||T||` in the spectral norm.
    pub residual: f64,
    /// Logarithm branch used per eigenvalue cluster (0 = principal).
    pub branch_log: Vec<(C64, i64)>,
    pub construction: Construction,
}

/// `(t, e^{tA})` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub points: Vec<(f64, Matrix)>,
}
