//! Exhaustive neighbor audit of the label query.
//!
//! For a given leaf, every neighboring leaf (one record added with any label,
//! or one existing record removed) is enumerated and the exact output
//! distributions are compared. The audit reports the worst log-probability
//! ratio; it does not judge it.

use std::collections::BTreeMap;

use serde::Serialize;

use super::mechanism::{score_labels, selection_log_probabilities};
use super::sensitivity::{global_sensitivity, label_gap_for, smooth_sensitivity};
use super::{Epsilon, LabelCounts, SelectionMode, SensitivityMode};
use crate::error::{Error, Result};

pub const DEFAULT_AUDIT_CAP: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NeighborChange {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborRatio {
    pub change: NeighborChange,
    /// Label of the added or removed record.
    pub label: usize,
    pub counts: Vec<u64>,
    /// `|ln P_x(c) - ln P_y(c)|` for every output label `c`.
    pub log_ratios: Vec<f64>,
}

impl NeighborRatio {
    pub fn max_log_ratio(&self) -> f64 {
        self.log_ratios.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeighborAudit {
    pub epsilon: f64,
    pub sensitivity_mode: SensitivityMode,
    pub selection_mode: SelectionMode,
    pub counts: Vec<u64>,
    pub neighbors: Vec<NeighborRatio>,
}

impl NeighborAudit {
    pub fn max_log_ratio(&self) -> f64 {
        self.neighbors
            .iter()
            .map(NeighborRatio::max_log_ratio)
            .fold(0.0, f64::max)
    }

    pub fn worst_neighbor(&self) -> Option<&NeighborRatio> {
        // first maximum wins, so ties resolve in enumeration order
        let mut best: Option<&NeighborRatio> = None;
        for n in &self.neighbors {
            if best.is_none_or(|b| n.max_log_ratio() > b.max_log_ratio()) {
                best = Some(n);
            }
        }
        best
    }

    /// Worst ratio per output label across all neighbors.
    pub fn per_label_ratios(&self) -> Vec<f64> {
        let mut out = vec![0.0f64; self.counts.len()];
        for n in &self.neighbors {
            for (o, r) in out.iter_mut().zip(&n.log_ratios) {
                *o = o.max(*r);
            }
        }
        out
    }

    /// Named report for JSON output.
    pub fn report(&self, labels: &[String]) -> AuditReport {
        let name = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
        let named_counts = |c: &[u64]| -> BTreeMap<String, u64> {
            c.iter().enumerate().map(|(i, &n)| (name(i), n)).collect()
        };
        AuditReport {
            epsilon: self.epsilon,
            sensitivity_mode: self.sensitivity_mode,
            selection_mode: self.selection_mode,
            counts: named_counts(&self.counts),
            max_log_ratio: self.max_log_ratio(),
            within_epsilon: self.max_log_ratio() <= self.epsilon,
            neighbors_checked: self.neighbors.len(),
            worst_neighbor: self.worst_neighbor().map(|n| WorstNeighbor {
                change: n.change,
                label: name(n.label),
                counts: named_counts(&n.counts),
                max_log_ratio: n.max_log_ratio(),
            }),
            per_label_ratios: self
                .per_label_ratios()
                .into_iter()
                .enumerate()
                .map(|(i, r)| (name(i), r))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstNeighbor {
    pub change: NeighborChange,
    pub label: String,
    pub counts: BTreeMap<String, u64>,
    pub max_log_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub epsilon: f64,
    pub sensitivity_mode: SensitivityMode,
    pub selection_mode: SelectionMode,
    pub counts: BTreeMap<String, u64>,
    pub max_log_ratio: f64,
    pub within_epsilon: bool,
    pub neighbors_checked: usize,
    pub worst_neighbor: Option<WorstNeighbor>,
    pub per_label_ratios: BTreeMap<String, f64>,
}

fn log_distribution(
    counts: &LabelCounts,
    eps: Epsilon,
    mode: SelectionMode,
    sensitivity_mode: SensitivityMode,
) -> Result<Vec<f64>> {
    let sensitivity = match sensitivity_mode {
        SensitivityMode::Smooth => smooth_sensitivity(label_gap_for(counts, mode)?, eps),
        SensitivityMode::Global => global_sensitivity(),
    };
    selection_log_probabilities(&score_labels(counts, mode), &sensitivity, eps)
}

fn log_ratio(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs()
    }
}

/// Audit the most-frequent-label query with the default cap.
pub fn neighbor_ratio_audit(
    counts: &LabelCounts,
    eps: Epsilon,
    sensitivity_mode: SensitivityMode,
) -> Result<NeighborAudit> {
    neighbor_ratio_audit_with(
        counts,
        eps,
        sensitivity_mode,
        SelectionMode::Most,
        DEFAULT_AUDIT_CAP,
    )
}

pub fn neighbor_ratio_audit_with(
    counts: &LabelCounts,
    eps: Epsilon,
    sensitivity_mode: SensitivityMode,
    mode: SelectionMode,
    cap: u64,
) -> Result<NeighborAudit> {
    counts.require_domain()?;
    if counts.total() > cap {
        return Err(Error::param(format!(
            "audit limited to {cap} records, counts sum to {}",
            counts.total()
        )));
    }
    let base = log_distribution(counts, eps, mode, sensitivity_mode)?;
    let mut neighbors = Vec::new();
    for change in [NeighborChange::Add, NeighborChange::Remove] {
        for label in 0..counts.num_labels() {
            let mut c = counts.as_slice().to_vec();
            match change {
                NeighborChange::Add => c[label] += 1,
                NeighborChange::Remove if c[label] > 0 => c[label] -= 1,
                NeighborChange::Remove => continue,
            }
            let other =
                log_distribution(&LabelCounts::new(c.clone()), eps, mode, sensitivity_mode)?;
            let log_ratios = base
                .iter()
                .zip(&other)
                .map(|(&a, &b)| log_ratio(a, b))
                .collect();
            neighbors.push(NeighborRatio {
                change,
                label,
                counts: c,
                log_ratios,
            });
        }
    }
    Ok(NeighborAudit {
        epsilon: eps.value(),
        sensitivity_mode,
        selection_mode: mode,
        counts: counts.as_slice().to_vec(),
        neighbors,
    })
}
