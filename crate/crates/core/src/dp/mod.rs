//! Differential-privacy primitives for releasing a leaf's most frequent label.
//!
//! The query scores every label 1 if it is (one of) the most frequent labels
//! in the leaf and 0 otherwise, then samples through the exponential
//! mechanism. Its smooth sensitivity depends only on the gap `j` between the
//! two largest counts and the budget: `e^(-j·ε)`. The global sensitivity is 1.

mod audit;
mod ledger;
mod mechanism;
mod sensitivity;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::LabelId;

pub use audit::{
    neighbor_ratio_audit, neighbor_ratio_audit_with, AuditReport, NeighborAudit, NeighborChange,
    NeighborRatio, DEFAULT_AUDIT_CAP,
};
pub use ledger::{BudgetLedger, Scope, Spend};
pub use mechanism::{
    exp_mechanism_select, majority_label_query, query_distribution, score_labels,
    selection_log_probabilities, selection_probabilities, QueryDiagnostics,
};
pub use sensitivity::{
    global_sensitivity, label_gap, label_gap_for, local_sensitivity_at_distance,
    smooth_sensitivity, Gap, SensitivityKind, SensitivityValue,
};

/// A strictly positive, finite privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && value > 0.0 {
            Ok(Epsilon(value))
        } else {
            Err(Error::param("epsilon must be positive"))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The budget divided evenly over `parts` queries.
    pub fn split(self, parts: usize) -> Result<Self> {
        if parts == 0 {
            return Err(Error::param("cannot split a budget into 0 parts"));
        }
        Epsilon::new(self.0 / parts as f64)
    }
}

impl TryFrom<f64> for Epsilon {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Epsilon::new(value)
    }
}

impl From<Epsilon> for f64 {
    fn from(e: Epsilon) -> f64 {
        e.0
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Which sensitivity calibrates the exponential mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SensitivityMode {
    /// `e^(-j·ε)`.
    #[default]
    Smooth,
    /// Constant 1.
    Global,
}

impl fmt::Display for SensitivityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SensitivityMode::Smooth => "smooth",
            SensitivityMode::Global => "global",
        })
    }
}

/// Whether the query targets the most or the least frequent label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    #[default]
    Most,
    Least,
}

/// Per-label frequencies over the full class domain, in schema label order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct LabelCounts(Vec<u64>);

impl LabelCounts {
    pub fn new(counts: Vec<u64>) -> Self {
        LabelCounts(counts)
    }

    pub fn zeros(num_labels: usize) -> Self {
        LabelCounts(vec![0; num_labels])
    }

    pub fn from_labels(num_labels: usize, labels: impl IntoIterator<Item = LabelId>) -> Self {
        let mut c = Self::zeros(num_labels);
        for l in labels {
            c.0[l] += 1;
        }
        c
    }

    pub fn increment(&mut self, label: LabelId) {
        self.0[label] += 1;
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn num_labels(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub(crate) fn require_domain(&self) -> Result<()> {
        if self.0.len() < 2 {
            return Err(Error::param(format!(
                "label domain needs at least 2 labels, got {}",
                self.0.len()
            )));
        }
        Ok(())
    }
}

impl From<Vec<u64>> for LabelCounts {
    fn from(v: Vec<u64>) -> Self {
        LabelCounts(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_validation() {
        assert!(Epsilon::new(0.0).is_err());
        assert!(Epsilon::new(-1.0).is_err());
        assert!(Epsilon::new(f64::NAN).is_err());
        assert!(Epsilon::new(f64::INFINITY).is_err());
        assert_eq!(Epsilon::new(0.5).unwrap().value(), 0.5);
        let msg = Epsilon::new(0.0).unwrap_err().to_string();
        assert_eq!(msg, "epsilon must be positive");
    }

    #[test]
    fn epsilon_serde_rejects_nonpositive() {
        assert!(serde_json::from_str::<Epsilon>("0.0").is_err());
        let e: Epsilon = serde_json::from_str("0.25").unwrap();
        assert_eq!(serde_json::to_string(&e).unwrap(), "0.25");
    }

    #[test]
    fn counts_from_labels() {
        let c = LabelCounts::from_labels(3, [0, 2, 2, 0, 0]);
        assert_eq!(c.as_slice(), &[3, 0, 2]);
        assert_eq!(c.total(), 5);
    }
}
