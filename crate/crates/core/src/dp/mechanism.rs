use rand::Rng;
use serde::Serialize;

use super::sensitivity::{global_sensitivity, label_gap_for, smooth_sensitivity, SensitivityValue};
use super::{Epsilon, LabelCounts, SelectionMode, SensitivityMode};
use crate::error::{Error, Result};
use crate::schema::LabelId;

/// 0/1 scores over the label domain.
///
/// `Most`: every label attaining the maximum count scores 1, except that an
/// empty leaf scores 0 everywhere. `Least`: every label attaining the minimum
/// count scores 1.
pub fn score_labels(counts: &LabelCounts, mode: SelectionMode) -> Vec<f64> {
    let c = counts.as_slice();
    let target = match mode {
        SelectionMode::Most => c.iter().copied().max(),
        SelectionMode::Least => c.iter().copied().min(),
    };
    let Some(target) = target else {
        return Vec::new();
    };
    if mode == SelectionMode::Most && target == 0 {
        return vec![0.0; c.len()];
    }
    c.iter()
        .map(|&n| if n == target { 1.0 } else { 0.0 })
        .collect()
}

/// Log-weights `ε·(u_c - u_max)/(2Δ)`, i.e. 0 for the best labels and
/// non-positive elsewhere. The coefficient `ε/(2Δ)` is formed in log space
/// and a zero score difference never multiplies it, so an infinite
/// coefficient yields `-inf` weights instead of NaN.
fn log_weights(scores: &[f64], sensitivity: &SensitivityValue, eps: Epsilon) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::param(
            "exponential mechanism needs at least one candidate",
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::param("scores must be finite"));
    }
    let ln_delta = sensitivity.ln_value();
    if ln_delta == f64::NEG_INFINITY {
        return Err(Error::param("sensitivity must be positive"));
    }
    let ln_coef = eps.value().ln() - std::f64::consts::LN_2 - ln_delta;
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(scores
        .iter()
        .map(|&u| {
            let diff = best - u;
            if diff == 0.0 {
                0.0
            } else {
                -(ln_coef + diff.ln()).exp()
            }
        })
        .collect())
}

/// Output distribution of the exponential mechanism.
pub fn selection_probabilities(
    scores: &[f64],
    sensitivity: &SensitivityValue,
    eps: Epsilon,
) -> Result<Vec<f64>> {
    let w: Vec<f64> = log_weights(scores, sensitivity, eps)?
        .into_iter()
        .map(f64::exp)
        .collect();
    let total: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / total).collect())
}

/// Natural logs of [`selection_probabilities`], accurate where the
/// probabilities themselves underflow.
pub fn selection_log_probabilities(
    scores: &[f64],
    sensitivity: &SensitivityValue,
    eps: Epsilon,
) -> Result<Vec<f64>> {
    let a = log_weights(scores, sensitivity, eps)?;
    // max(a) == 0, so the sum is in [1, n]
    let ln_total = a.iter().map(|x| x.exp()).sum::<f64>().ln();
    Ok(a.into_iter().map(|x| x - ln_total).collect())
}

/// Draw a candidate index with probability `∝ exp(ε·u_c / (2Δ))`.
pub fn exp_mechanism_select<R: Rng + ?Sized>(
    scores: &[f64],
    sensitivity: &SensitivityValue,
    eps: Epsilon,
    rng: &mut R,
) -> Result<usize> {
    let w: Vec<f64> = log_weights(scores, sensitivity, eps)?
        .into_iter()
        .map(f64::exp)
        .collect();
    let total: f64 = w.iter().sum();
    let x = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &wi) in w.iter().enumerate() {
        if wi > 0.0 {
            acc += wi;
            last_positive = i;
            if x < acc {
                return Ok(i);
            }
        }
    }
    // only reachable through rounding in the cumulative sum
    Ok(last_positive)
}

/// Non-private facts about one query, for evaluation only. Never persisted in
/// a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueryDiagnostics {
    pub gap: u64,
    /// `e^(-j·ε)` at the query's budget, whatever sensitivity was used.
    pub smooth_sensitivity: f64,
    /// Records in the leaf.
    pub total: u64,
    /// First label in schema order attaining the target count; `None` for
    /// an empty leaf.
    pub true_label: Option<LabelId>,
    /// The released label is not among the labels that scored 1.
    pub flipped: bool,
}

fn sensitivity_for(
    counts: &LabelCounts,
    eps: Epsilon,
    mode: SelectionMode,
    sensitivity_mode: SensitivityMode,
) -> Result<(u64, SensitivityValue, SensitivityValue)> {
    let gap = label_gap_for(counts, mode)?;
    let smooth = smooth_sensitivity(gap, eps);
    let used = match sensitivity_mode {
        SensitivityMode::Smooth => smooth,
        SensitivityMode::Global => global_sensitivity(),
    };
    Ok((gap.0, smooth, used))
}

/// Exact output distribution of [`majority_label_query`].
pub fn query_distribution(
    counts: &LabelCounts,
    eps: Epsilon,
    mode: SelectionMode,
    sensitivity_mode: SensitivityMode,
) -> Result<Vec<f64>> {
    let (_, _, used) = sensitivity_for(counts, eps, mode, sensitivity_mode)?;
    selection_probabilities(&score_labels(counts, mode), &used, eps)
}

/// Release the most (or least) frequent label of `counts` under `eps`.
pub fn majority_label_query<R: Rng + ?Sized>(
    counts: &LabelCounts,
    eps: Epsilon,
    mode: SelectionMode,
    sensitivity_mode: SensitivityMode,
    rng: &mut R,
) -> Result<(LabelId, QueryDiagnostics)> {
    let (gap, smooth, used) = sensitivity_for(counts, eps, mode, sensitivity_mode)?;
    let scores = score_labels(counts, mode);
    let label = exp_mechanism_select(&scores, &used, eps, rng)?;
    let total = counts.total();
    let true_label = if total == 0 {
        None
    } else {
        scores.iter().position(|&s| s == 1.0)
    };
    Ok((
        label,
        QueryDiagnostics {
            gap,
            smooth_sensitivity: smooth.value(),
            total,
            true_label,
            flipped: total > 0 && scores[label] != 1.0,
        },
    ))
}
