//! Embeddability of finite matrices into one-parameter semigroups.
//!
//! Given a square matrix `T`, this crate decides whether `T = e^A` for a
//! real generator `A` (real embeddability) and, for entrywise nonnegative
//! `T`, whether a Metzler generator exists so that the whole flow `e^{tA}`,
//! `t >= 0`, stays nonnegative (positive embeddability). When the answer is
//! yes, a generator is constructed and checked; when it is no, the violated
//! condition is named.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the command
//! line and other IO live in the companion `matembed` crate.
//!
//! Module map:
//! - [`linalg`]: dense complex kernel (Schur, SVD, expm, solves).
//! - [`jordan`]: numerical Jordan structure (Weyr sequences, chains).
//! - [`real_embed`]: real embeddability, real logarithms and square roots.
//! - [`positive_embed`]: necessary conditions and deciders for positive
//!   embeddability.
//! - [`verify`]: seeded ensembles, brute-force oracles and property probes.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod error;
pub mod jordan;
pub mod linalg;
pub mod matrix;
pub mod positive_embed;
pub mod real_embed;
pub mod report;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::Tolerances;
pub use matrix::{Matrix, C64};
pub use report::{
    Condition, ConditionStatus, Construction, DecisionReport, EmbeddingCertificate, TrajectorySample, Verdict,
};
