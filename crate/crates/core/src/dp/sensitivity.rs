use serde::{Deserialize, Serialize};

use super::{Epsilon, LabelCounts, SelectionMode};
use crate::error::Result;

/// Distance (in records) from the current counts to the nearest dataset where
/// the winning label set changes: `n_c1 - n_c2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Gap(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitivityKind {
    Global,
    LocalAtDistance { k: u64 },
    Smooth,
}

/// A sensitivity value, stored as its natural log so that `e^(-j·ε)` stays
/// representable for any gap (it underflows `f64` once `j·ε > ~745`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityValue {
    ln_value: f64,
    kind: SensitivityKind,
}

impl SensitivityValue {
    pub fn from_ln(ln_value: f64, kind: SensitivityKind) -> Self {
        debug_assert!(ln_value <= 0.0 && !ln_value.is_nan());
        SensitivityValue { ln_value, kind }
    }

    pub fn value(&self) -> f64 {
        self.ln_value.exp()
    }

    pub fn ln_value(&self) -> f64 {
        self.ln_value
    }

    pub fn kind(&self) -> SensitivityKind {
        self.kind
    }
}

/// Gap between the two largest counts. Zero for an empty leaf; equal to the
/// top count when every other label is absent.
pub fn label_gap(counts: &LabelCounts) -> Result<Gap> {
    label_gap_for(counts, SelectionMode::Most)
}

/// Gap for either query direction. For [`SelectionMode::Least`] it is the
/// distance between the smallest and second-smallest counts.
pub fn label_gap_for(counts: &LabelCounts, mode: SelectionMode) -> Result<Gap> {
    counts.require_domain()?;
    let c = counts.as_slice();
    let (mut first, mut second) = match mode {
        SelectionMode::Most => (0u64, 0u64),
        SelectionMode::Least => (u64::MAX, u64::MAX),
    };
    for &n in c {
        match mode {
            SelectionMode::Most => {
                if n > first {
                    second = first;
                    first = n;
                } else if n > second {
                    second = n;
                }
            }
            SelectionMode::Least => {
                if n < first {
                    second = first;
                    first = n;
                } else if n < second {
                    second = n;
                }
            }
        }
    }
    Ok(Gap(first.abs_diff(second)))
}

/// Local sensitivity of the 0/1 score at distance `k`: 0 while `k < j`, 1 after.
pub fn local_sensitivity_at_distance(gap: Gap, k: u64) -> SensitivityValue {
    let ln = if k < gap.0 { f64::NEG_INFINITY } else { 0.0 };
    SensitivityValue::from_ln(ln, SensitivityKind::LocalAtDistance { k })
}

/// `e^(-j·ε)`.
pub fn smooth_sensitivity(gap: Gap, eps: Epsilon) -> SensitivityValue {
    SensitivityValue::from_ln(-(gap.0 as f64) * eps.value(), SensitivityKind::Smooth)
}

pub fn global_sensitivity() -> SensitivityValue {
    SensitivityValue::from_ln(0.0, SensitivityKind::Global)
}
