//! Repeated k-fold cross-validation, classification metrics and training
//! diagnostics.
//!
//! AUC and F1 are binary-only and treat the least frequent label in the
//! ground truth as the positive class. The AUC score of a record is the
//! fraction of trees voting for the positive class.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{DatasetView, DisjointPartition, RecordSource};
use crate::dp::{BudgetLedger, SensitivityMode};
use crate::error::{Error, Result};
use crate::forest::{build_forest, TrainConfig, TrainingDiagnostics};
use crate::model::BudgetMode;
use crate::rng::{derive_seed, substream, StreamDomain};
use crate::schema::LabelId;

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_REPEATS: usize = 10;

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        MeanStd {
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub samples: Vec<f64>,
}

impl Summary {
    pub fn new(samples: Vec<f64>) -> Self {
        let MeanStd { mean, std } = MeanStd::of(&samples);
        Summary { mean, std, samples }
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::param(format!(
            "length mismatch: {a} predictions, {b} labels"
        )));
    }
    if a == 0 {
        return Err(Error::param("cannot score an empty prediction list"));
    }
    Ok(())
}

pub fn accuracy(predictions: &[LabelId], truth: &[LabelId]) -> Result<f64> {
    check_lengths(predictions.len(), truth.len())?;
    let hits = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Least frequent label in `truth` for a two-label domain. An exact tie
/// picks label 1.
pub fn binary_positive_label(truth: &[LabelId], num_labels: usize) -> Result<LabelId> {
    if num_labels != 2 {
        return Err(Error::param(format!(
            "AUC and F1 need exactly 2 class labels, got {num_labels}"
        )));
    }
    let ones = truth.iter().filter(|&&l| l == 1).count();
    Ok(if ones <= truth.len() - ones { 1 } else { 0 })
}

/// Probability that a random positive outscores a random negative, ties
/// counted as one half.
pub fn auc(scores: &[f64], is_positive: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), is_positive.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::param("AUC scores must not be NaN"));
    }
    let pos = is_positive.iter().filter(|&&p| p).count();
    let neg = is_positive.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::param(
            "AUC needs both classes present in the ground truth",
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Mann-Whitney U from mid-ranks
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| is_positive[k]).count();
        rank_sum += mid_rank * tied_pos as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// F1 of `positive`. Zero when precision and recall are both zero.
pub fn f1_for(predictions: &[LabelId], truth: &[LabelId], positive: LabelId) -> Result<f64> {
    check_lengths(predictions.len(), truth.len())?;
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p == positive, t == positive) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// F1 with the least frequent true label as the positive class.
pub fn f1(predictions: &[LabelId], truth: &[LabelId], num_labels: usize) -> Result<f64> {
    let positive = binary_positive_label(truth, num_labels)?;
    f1_for(predictions, truth, positive)
}

/// Leaf statistics behind the empty-leaf and label-flip analyses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    /// Share of leaves reached by no training record, mean ± std over trees.
    pub empty_leaf_fraction: MeanStd,
    /// Share of non-empty leaves whose released label is not a true
    /// most-frequent label. Zero if every leaf is empty.
    pub flip_fraction: f64,
    /// Mean of `e^(-j·ε)` over non-empty leaves. One if every leaf is empty.
    pub mean_smooth_sensitivity: f64,
    pub trees: usize,
    pub leaves: usize,
    pub non_empty_leaves: usize,
}

/// Summarize one or more training runs' diagnostics.
pub fn collect_diagnostics<'a>(
    runs: impl IntoIterator<Item = Option<&'a TrainingDiagnostics>>,
) -> Result<DiagnosticsReport> {
    let mut empty_fractions = Vec::new();
    let mut leaves = 0usize;
    let mut non_empty = 0usize;
    let mut flips = 0usize;
    let mut sens_sum = 0.0;
    for run in runs {
        let run = run.ok_or_else(|| {
            Error::param("training diagnostics missing; train with diagnostics enabled")
        })?;
        for tree in &run.trees {
            let empty = tree.leaves.iter().filter(|l| l.total == 0).count();
            if !tree.leaves.is_empty() {
                empty_fractions.push(empty as f64 / tree.leaves.len() as f64);
            }
            leaves += tree.leaves.len();
            for leaf in tree.leaves.iter().filter(|l| l.total > 0) {
                non_empty += 1;
                flips += usize::from(leaf.flipped);
                sens_sum += leaf.smooth_sensitivity;
            }
        }
    }
    if empty_fractions.is_empty() {
        return Err(Error::param("no trees to summarize"));
    }
    Ok(DiagnosticsReport {
        empty_leaf_fraction: MeanStd::of(&empty_fractions),
        flip_fraction: if non_empty == 0 {
            0.0
        } else {
            flips as f64 / non_empty as f64
        },
        mean_smooth_sensitivity: if non_empty == 0 {
            1.0
        } else {
            sens_sum / non_empty as f64
        },
        trees: empty_fractions.len(),
        leaves,
        non_empty_leaves: non_empty,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub accuracy: Summary,
    /// Binary datasets only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub auc: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub epsilon: f64,
    pub trees: usize,
    pub depth: usize,
    pub sensitivity_mode: SensitivityMode,
    pub budget_mode: BudgetMode,
    pub seed: u64,
}

/// Cross-validation result, serialized as the evaluation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub config: ReportConfig,
    pub folds: usize,
    pub repeats: usize,
    pub metrics: MetricsReport,
    pub diagnostics: DiagnosticsReport,
}

struct CellResult {
    accuracy: f64,
    auc: Option<f64>,
    f1: Option<f64>,
    depth: usize,
    diagnostics: TrainingDiagnostics,
}

/// Held-out fold `f` of a fold partition, training on the rest.
fn run_cell<S: RecordSource + ?Sized>(
    data: &S,
    folds: &DisjointPartition,
    fold: usize,
    config: &TrainConfig,
) -> Result<CellResult> {
    let train_idx: Vec<usize> = folds
        .subsets()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != fold)
        .flat_map(|(_, s)| s.iter().copied())
        .collect();
    let train = DatasetView::new(data, &train_idx);
    let test = folds.view(data, fold);
    let out = build_forest(&train, config, BudgetLedger::new(config.epsilon))?;
    let model = &out.model;

    let num_labels = data.schema().num_labels();
    let truth: Vec<LabelId> = (0..test.len()).map(|i| test.record(i).label).collect();
    let mut predictions = Vec::with_capacity(test.len());
    let mut votes = Vec::with_capacity(test.len());
    for i in 0..test.len() {
        let v = model.votes(&test.record(i).values);
        predictions.push(model.predict(&test.record(i).values));
        votes.push(v);
    }
    let acc = accuracy(&predictions, &truth)?;
    let (auc_v, f1_v) = if num_labels == 2 {
        let positive = binary_positive_label(&truth, num_labels)?;
        let tau = model.trees().len() as f64;
        let scores: Vec<f64> = votes.iter().map(|v| f64::from(v[positive]) / tau).collect();
        let is_pos: Vec<bool> = truth.iter().map(|&t| t == positive).collect();
        // a fold holding a single class has no AUC; skip it rather than fail
        (
            auc(&scores, &is_pos).ok(),
            Some(f1_for(&predictions, &truth, positive)?),
        )
    } else {
        (None, None)
    };
    Ok(CellResult {
        accuracy: acc,
        auc: auc_v,
        f1: f1_v,
        depth: model.config().depth,
        diagnostics: out.diagnostics.expect("diagnostics requested"),
    })
}

/// `repeats` rounds of `folds`-fold cross-validation, each round with a fresh
/// shuffle. Cells run in parallel; results do not depend on scheduling.
pub fn cross_validate<S: RecordSource + ?Sized>(
    data: &S,
    config: &TrainConfig,
    folds: usize,
    repeats: usize,
) -> Result<EvalReport> {
    if folds < 2 {
        return Err(Error::param("need at least 2 folds"));
    }
    if repeats == 0 {
        return Err(Error::param("need at least 1 repeat"));
    }
    if folds > data.len() {
        return Err(Error::param(format!(
            "{folds} folds requested for {} records",
            data.len()
        )));
    }
    let assignments: Vec<DisjointPartition> = (0..repeats)
        .map(|r| {
            DisjointPartition::new(
                data.len(),
                folds,
                &mut substream(config.seed, StreamDomain::FoldAssignment, r as u64),
            )
        })
        .collect::<Result<_>>()?;

    let cells: Vec<CellResult> = (0..repeats * folds)
        .into_par_iter()
        .map(|cell| {
            let (r, f) = (cell / folds, cell % folds);
            let cell_config = TrainConfig {
                seed: derive_seed(config.seed, StreamDomain::CrossValidationCell, cell as u64),
                collect_diagnostics: true,
                ..config.clone()
            };
            run_cell(data, &assignments[r], f, &cell_config)
        })
        .collect::<Result<_>>()?;

    let accuracy = Summary::new(cells.iter().map(|c| c.accuracy).collect());
    let binary = data.schema().num_labels() == 2;
    let auc = binary.then(|| Summary::new(cells.iter().filter_map(|c| c.auc).collect()));
    let f1 = binary.then(|| Summary::new(cells.iter().filter_map(|c| c.f1).collect()));
    let diagnostics = collect_diagnostics(cells.iter().map(|c| Some(&c.diagnostics)))?;
    Ok(EvalReport {
        config: ReportConfig {
            epsilon: config.epsilon.value(),
            trees: config.trees,
            depth: cells[0].depth,
            sensitivity_mode: config.sensitivity_mode,
            budget_mode: config.budget_mode,
            seed: config.seed,
        },
        folds,
        repeats,
        metrics: MetricsReport { accuracy, auc, f1 },
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::QueryDiagnostics;
    use crate::forest::TreeDiagnostics;
    use proptest::prelude::*;

    /// Pairwise oracle: count correctly ordered (positive, negative) pairs.
    fn auc_by_pairs(scores: &[f64], pos: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn accuracy_examples() {
        assert!((accuracy(&[0, 0, 1], &[0, 1, 1]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(accuracy(&[1, 0], &[1, 0]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 0], &[0, 1]).unwrap(), 0.0);
        assert!(accuracy(&[1], &[1, 0]).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(
            auc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap(),
            1.0
        );
        assert_eq!(auc(&[0.5; 4], &[true, false, true, false]).unwrap(), 0.5);
        let scores = [0.9, 0.6, 0.7, 0.1];
        let pos = [true, true, false, false];
        assert_eq!(auc_by_pairs(&scores, &pos), 0.75);
        assert_eq!(auc(&scores, &pos).unwrap(), 0.75);
        assert!(auc(&[0.1, 0.2], &[true, true]).is_err());
    }

    #[test]
    fn f1_examples() {
        // positive = label 1 (least frequent in truth)
        let truth = [1, 1, 0, 0, 0];
        let pred = [1, 0, 1, 0, 0]; // TP=1, FP=1, FN=1
        assert_eq!(f1(&pred, &truth, 2).unwrap(), 0.5);
        assert_eq!(f1(&truth, &truth, 2).unwrap(), 1.0);
        assert_eq!(f1(&[0; 5], &truth, 2).unwrap(), 0.0);
        assert!(f1(&pred, &truth, 3).is_err());
    }

    #[test]
    fn positive_is_least_frequent() {
        assert_eq!(binary_positive_label(&[0, 0, 1], 2).unwrap(), 1);
        assert_eq!(binary_positive_label(&[0, 1, 1], 2).unwrap(), 0);
        assert_eq!(binary_positive_label(&[0, 1], 2).unwrap(), 1);
    }

    #[test]
    fn mean_std_is_population() {
        let s = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(MeanStd::of(&[0.7; 5]).std, 0.0);
    }

    fn leaf(total: u64, flipped: bool, s: f64) -> QueryDiagnostics {
        QueryDiagnostics {
            gap: 0,
            smooth_sensitivity: s,
            total,
            true_label: None,
            flipped,
        }
    }

    #[test]
    fn diagnostics_summary() {
        let e1 = (-1.0f64).exp();
        let d = TrainingDiagnostics {
            trees: vec![TreeDiagnostics {
                epsilon_per_query: 1.0,
                leaves: vec![
                    leaf(5, false, e1),
                    leaf(3, true, e1),
                    leaf(0, false, 1.0),
                    leaf(0, false, 1.0),
                ],
            }],
        };
        let r = collect_diagnostics([Some(&d)]).unwrap();
        assert_eq!(r.empty_leaf_fraction.mean, 0.5);
        assert_eq!(r.flip_fraction, 0.5);
        assert!((r.mean_smooth_sensitivity - 0.36788).abs() < 5e-6);
        assert!(collect_diagnostics([None]).is_err());
    }

    proptest! {
        #[test]
        fn auc_matches_pair_oracle(v in prop::collection::vec((0u8..6, any::<bool>()), 2..60)) {
            prop_assume!(v.iter().any(|x| x.1) && v.iter().any(|x| !x.1));
            let scores: Vec<f64> = v.iter().map(|x| f64::from(x.0) / 5.0).collect();
            let pos: Vec<bool> = v.iter().map(|x| x.1).collect();
            let a = auc(&scores, &pos).unwrap();
            prop_assert!((a - auc_by_pairs(&scores, &pos)).abs() < 1e-12);
            let flipped: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
            prop_assert!((a + auc(&flipped, &pos).unwrap() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn accuracy_ignores_relabeling(v in prop::collection::vec((0usize..3, 0usize..3), 1..50)) {
            let (p, t): (Vec<usize>, Vec<usize>) = v.into_iter().unzip();
            let perm = [2usize, 0, 1];
            let p2: Vec<usize> = p.iter().map(|&x| perm[x]).collect();
            let t2: Vec<usize> = t.iter().map(|&x| perm[x]).collect();
            prop_assert_eq!(accuracy(&p, &t).unwrap(), accuracy(&p2, &t2).unwrap());
        }
    }
}
