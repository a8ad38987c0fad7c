//! Input documents: one square matrix per JSON file.
//!
//! ```json
//! { "n": 2, "entries": [[1, 0.5], [0, [1, 0]]], "labels": ["a", "b"],
//!   "tolerances": { "verify_tol": 1e-9 } }
//! ```
//!
//! Entries are reals or `[re, im]` pairs.

use std::fmt;

use matembed_core::{Matrix, Tolerances, C64};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> C64 {
        match self {
            Entry::Real(x) => C64::new(x, 0.0),
            Entry::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eig_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos_tol: Option<f64>,
}

impl ToleranceOverrides {
    /// Later layers win.
    pub fn layer(&self, over: &ToleranceOverrides) -> ToleranceOverrides {
        ToleranceOverrides {
            rank_tol: over.rank_tol.or(self.rank_tol),
            eig_tol: over.eig_tol.or(self.eig_tol),
            verify_tol: over.verify_tol.or(self.verify_tol),
            pos_tol: over.pos_tol.or(self.pos_tol),
        }
    }

    pub fn resolve(&self) -> Result<Tolerances, ParseError> {
        let mut t = Tolerances::default();
        for (name, value, slot) in [
            ("rank_tol", self.rank_tol, &mut t.rank_tol),
            ("eig_tol", self.eig_tol, &mut t.eig_cluster_tol),
            ("verify_tol", self.verify_tol, &mut t.verify_tol),
            ("pos_tol", self.pos_tol, &mut t.positivity_tol),
        ] {
            if let Some(v) = value {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(ParseError(format!("tolerance {name} must be finite and nonnegative, got {v}")));
                }
                *slot = v;
            }
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDocument {
    pub n: usize,
    pub entries: Vec<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceOverrides>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ParseError {}

impl MatrixDocument {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let doc: MatrixDocument = serde_json::from_str(text).map_err(|e| ParseError(format!("invalid document: {e}")))?;
        doc.validate()?;
        Ok(doc)
    }

    fn validate(&self) -> Result<(), ParseError> {
        let n = self.n;
        if n == 0 {
            return Err(ParseError("n must be at least 1".into()));
        }
        if self.entries.len() != n {
            return Err(ParseError(format!("expected {n} rows, found {}", self.entries.len())));
        }
        for (i, row) in self.entries.iter().enumerate() {
            if row.len() != n {
                return Err(ParseError(format!("row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, e) in row.iter().enumerate() {
                let z = e.value();
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(ParseError(format!("entry ({i}, {j}) is not finite")));
                }
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(ParseError(format!("{} labels for {n} rows", labels.len())));
            }
        }
        if let Some(t) = &self.tolerances {
            t.resolve()?;
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| self.entries[i][j].value())
    }
}

/// Real entries where the imaginary part is exactly zero, pairs otherwise.
pub fn entries_of(m: &Matrix) -> Vec<Vec<Entry>> {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| {
                    let z = m[(i, j)];
                    if z.im == 0.0 {
                        Entry::Real(clean(z.re))
                    } else {
                        Entry::Complex([clean(z.re), clean(z.im)])
                    }
                })
                .collect()
        })
        .collect()
}

/// Folds `-0.0` into `0.0` so output does not depend on the sign of zero.
pub fn clean(x: f64) -> f64 {
    x + 0.0
}
