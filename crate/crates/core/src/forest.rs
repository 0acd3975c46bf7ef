//! Forest training: data-independent structure, then one private label query
//! per leaf.

use rand::Rng;
use rayon::prelude::*;

use crate::data::{DisjointPartition, RecordSource};
use crate::dp::{
    majority_label_query, BudgetLedger, Epsilon, QueryDiagnostics, Scope, SelectionMode,
    SensitivityMode,
};
use crate::error::{Error, Result};
use crate::model::{BudgetMode, ForestModel, ModelConfig};
use crate::rng::{substream, StreamDomain};
use crate::tree::{build_tree, optimal_depth_for, Tree};

pub const DEFAULT_TREES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epsilon: Epsilon,
    pub trees: usize,
    pub depth_override: Option<usize>,
    pub sensitivity_mode: SensitivityMode,
    pub budget_mode: BudgetMode,
    pub seed: u64,
    /// Keep per-leaf query diagnostics. These are NOT private and must only
    /// be used for evaluation.
    pub collect_diagnostics: bool,
}

impl TrainConfig {
    pub fn new(epsilon: Epsilon) -> Self {
        TrainConfig {
            epsilon,
            trees: DEFAULT_TREES,
            depth_override: None,
            sensitivity_mode: SensitivityMode::Smooth,
            budget_mode: BudgetMode::DisjointFullBudget,
            seed: 0,
            collect_diagnostics: false,
        }
    }

    pub fn with_trees(mut self, trees: usize) -> Self {
        self.trees = trees;
        self
    }

    pub fn with_depth(mut self, depth: usize) -> Self {
        self.depth_override = Some(depth);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_sensitivity(mut self, mode: SensitivityMode) -> Self {
        self.sensitivity_mode = mode;
        self
    }

    pub fn with_budget_mode(mut self, mode: BudgetMode) -> Self {
        self.budget_mode = mode;
        self
    }

    pub fn with_diagnostics(mut self, on: bool) -> Self {
        self.collect_diagnostics = on;
        self
    }

    /// Budget spent by each leaf query.
    pub fn epsilon_per_query(&self) -> Result<Epsilon> {
        match self.budget_mode {
            BudgetMode::DisjointFullBudget => Ok(self.epsilon),
            BudgetMode::SharedSplitBudget => self.epsilon.split(self.trees),
        }
    }
}

/// Per-leaf query facts for one tree, in leaf (node id) order.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeDiagnostics {
    pub epsilon_per_query: f64,
    pub leaves: Vec<QueryDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingDiagnostics {
    pub trees: Vec<TreeDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: ForestModel,
    pub ledger: BudgetLedger,
    /// Present only when [`TrainConfig::collect_diagnostics`] is set.
    pub diagnostics: Option<TrainingDiagnostics>,
}

/// Route every record of `subset` to its leaf and release each leaf's most
/// frequent label, empty leaves included.
pub fn fill_leaf_labels<S: RecordSource + ?Sized, R: Rng + ?Sized>(
    mut tree: Tree,
    subset: &S,
    eps: Epsilon,
    sensitivity_mode: SensitivityMode,
    rng: &mut R,
    collect_diagnostics: bool,
) -> Result<(Tree, Option<TreeDiagnostics>)> {
    let num_labels = subset.schema().num_labels();
    let leaves: Vec<usize> = tree.leaves().collect();
    let mut slot = vec![usize::MAX; tree.nodes().len()];
    for (i, &leaf) in leaves.iter().enumerate() {
        slot[leaf] = i;
    }
    let mut counts = vec![crate::dp::LabelCounts::zeros(num_labels); leaves.len()];
    for i in 0..subset.len() {
        let r = subset.record(i);
        counts[slot[tree.route_record(r)]].increment(r.label);
    }
    let mut diags = collect_diagnostics.then(|| Vec::with_capacity(leaves.len()));
    for (&leaf, c) in leaves.iter().zip(&counts) {
        let (label, d) = majority_label_query(c, eps, SelectionMode::Most, sensitivity_mode, rng)?;
        tree.set_label(leaf, label);
        if let Some(v) = diags.as_mut() {
            v.push(d);
        }
    }
    Ok((
        tree,
        diags.map(|leaves| TreeDiagnostics {
            epsilon_per_query: eps.value(),
            leaves,
        }),
    ))
}

/// Train a forest on `data` and record the spends in `ledger`.
///
/// Tree `t` uses substreams `(seed, TreeStructure, t)` and `(seed,
/// LeafLabels, t)`, so the result does not depend on how trees are scheduled
/// across threads.
pub fn build_forest<S: RecordSource + ?Sized>(
    data: &S,
    config: &TrainConfig,
    ledger: BudgetLedger,
) -> Result<TrainOutput> {
    let n = data.len();
    let tau = config.trees;
    if n == 0 {
        return Err(Error::param("cannot train on an empty dataset"));
    }
    if tau == 0 {
        return Err(Error::param("number of trees must be at least 1"));
    }
    if tau > n {
        return Err(Error::param(format!(
            "number of trees ({tau}) exceeds number of records ({n})"
        )));
    }
    let tau_u32 = u32::try_from(tau).map_err(|_| Error::param("too many trees"))?;
    let schema = data.schema();
    let depth = match config.depth_override {
        Some(0) => return Err(Error::param("tree depth must be at least 1")),
        Some(d) => d,
        None => optimal_depth_for(schema)?.depth,
    };
    let eps_query = config.epsilon_per_query()?;

    let partition = match config.budget_mode {
        BudgetMode::DisjointFullBudget => Some(DisjointPartition::new(
            n,
            tau,
            &mut substream(config.seed, StreamDomain::Partition, 0),
        )?),
        BudgetMode::SharedSplitBudget => None,
    };

    let trained: Vec<(Tree, Option<TreeDiagnostics>)> = (0..tau)
        .into_par_iter()
        .map(|t| {
            let structure = build_tree(
                schema,
                depth,
                &mut substream(config.seed, StreamDomain::TreeStructure, t as u64),
            )?;
            let mut label_rng = substream(config.seed, StreamDomain::LeafLabels, t as u64);
            match &partition {
                Some(p) => fill_leaf_labels(
                    structure,
                    &p.view(data, t),
                    eps_query,
                    config.sensitivity_mode,
                    &mut label_rng,
                    config.collect_diagnostics,
                ),
                None => fill_leaf_labels(
                    structure,
                    data,
                    eps_query,
                    config.sensitivity_mode,
                    &mut label_rng,
                    config.collect_diagnostics,
                ),
            }
        })
        .collect::<Result<_>>()?;

    // Leaves of one tree partition its records, so each tree's leaf queries
    // compose in parallel and cost one query's budget.
    let before = ledger.composed_cost();
    let mut ledger = ledger;
    for t in 0..tau {
        ledger = match config.budget_mode {
            BudgetMode::DisjointFullBudget => {
                ledger.record(Scope::part("tree", t as u64), config.epsilon)
            }
            BudgetMode::SharedSplitBudget => {
                ledger.record_share(Scope::Whole, config.epsilon, tau_u32)
            }
        };
    }
    if !ledger.within_budget() {
        return Err(Error::Invariant(format!(
            "privacy budget exceeded: composed cost {} > budget {}",
            ledger.composed_cost(),
            ledger.total_budget()
        )));
    }
    if before == 0.0 && ledger.composed_cost() != config.epsilon.value() {
        return Err(Error::Invariant(format!(
            "forest cost {} differs from epsilon {}",
            ledger.composed_cost(),
            config.epsilon
        )));
    }

    let mut trees = Vec::with_capacity(tau);
    let mut diags = Vec::new();
    for (tree, d) in trained {
        trees.push(tree);
        diags.extend(d);
    }
    let model = ForestModel {
        schema: schema.clone(),
        config: ModelConfig {
            epsilon: config.epsilon.value(),
            tau,
            depth,
            sensitivity_mode: config.sensitivity_mode,
            budget_mode: config.budget_mode,
            seed: config.seed,
        },
        trees,
    };
    Ok(TrainOutput {
        model,
        ledger,
        diagnostics: config
            .collect_diagnostics
            .then_some(TrainingDiagnostics { trees: diags }),
    })
}

/// Train with a fresh ledger whose total budget is `config.epsilon`.
pub fn train<S: RecordSource + ?Sized>(data: &S, config: &TrainConfig) -> Result<TrainOutput> {
    build_forest(data, config, BudgetLedger::new(config.epsilon))
}
