//! Trained forest and its JSON model file.
//!
//! A model holds the public schema, the data-independent tree structure and
//! the released leaf labels. Nothing else derived from training data (counts,
//! gaps, diagnostics) is ever stored.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::FeatureValue;
use crate::dp::SensitivityMode;
use crate::error::{Error, Result};
use crate::schema::{FeatureKind, FeatureSchema, LabelId};
use crate::tree::{Node, NodeId, Tree};

pub const FORMAT_VERSION: u32 = 1;

/// How the budget is spread over the trees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BudgetMode {
    /// Each tree sees its own disjoint share of the records and spends the
    /// full budget on it.
    #[default]
    #[serde(rename = "disjoint")]
    DisjointFullBudget,
    /// Every tree sees all records and spends `ε/τ`.
    #[serde(rename = "split")]
    SharedSplitBudget,
}

impl std::fmt::Display for BudgetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BudgetMode::DisjointFullBudget => "disjoint",
            BudgetMode::SharedSplitBudget => "split",
        })
    }
}

/// Training parameters echoed into the model file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub epsilon: f64,
    pub tau: usize,
    pub depth: usize,
    pub sensitivity_mode: SensitivityMode,
    pub budget_mode: BudgetMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub(crate) schema: FeatureSchema,
    pub(crate) config: ModelConfig,
    pub(crate) trees: Vec<Tree>,
}

impl ForestModel {
    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Leaf label each tree assigns to `values`.
    pub fn tree_votes<'a>(
        &'a self,
        values: &'a [FeatureValue],
    ) -> impl Iterator<Item = LabelId> + 'a {
        self.trees.iter().map(move |t| {
            t.label(t.route(values))
                .expect("model trees are fully labelled")
        })
    }

    /// Number of trees voting for each label.
    pub fn votes(&self, values: &[FeatureValue]) -> Vec<u32> {
        let mut v = vec![0u32; self.schema.num_labels()];
        for l in self.tree_votes(values) {
            v[l] += 1;
        }
        v
    }

    /// Most-voted label; ties go to the label listed first in the schema.
    pub fn predict(&self, values: &[FeatureValue]) -> LabelId {
        let votes = self.votes(values);
        let mut best = 0;
        for (i, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = i;
            }
        }
        best
    }

    /// Fraction of trees voting for each label.
    pub fn predict_scores(&self, values: &[FeatureValue]) -> Vec<f64> {
        let tau = self.trees.len() as f64;
        self.votes(values)
            .into_iter()
            .map(|v| f64::from(v) / tau)
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format_version: FORMAT_VERSION,
            schema: self.schema.clone(),
            config: self.config,
            trees: self
                .trees
                .iter()
                .map(|t| encode(&self.schema, t, t.root()))
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json_err = |source| Error::Json {
            context: "model".into(),
            source,
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
        match value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
        {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => {
                return Err(Error::Model(format!(
                    "unsupported model format version {v} (expected {FORMAT_VERSION})"
                )))
            }
            None => return Err(Error::Model("missing format_version".into())),
        }
        let file: ModelFile = serde_json::from_value(value).map_err(json_err)?;
        if file.trees.is_empty() {
            return Err(Error::Model("model has no trees".into()));
        }
        if file.trees.len() != file.config.tau {
            return Err(Error::Model(format!(
                "config says {} trees, file has {}",
                file.config.tau,
                file.trees.len()
            )));
        }
        let mut trees = Vec::with_capacity(file.trees.len());
        for repr in &file.trees {
            let mut nodes = Vec::new();
            decode(&file.schema, repr, &mut nodes)?;
            let tree = Tree::from_nodes(nodes);
            tree.validate(&file.schema, true)?;
            if tree.depth() > file.config.depth {
                return Err(Error::Model(format!(
                    "tree depth {} exceeds configured depth {}",
                    tree.depth(),
                    file.config.depth
                )));
            }
            trees.push(tree);
        }
        Ok(ForestModel {
            schema: file.schema,
            config: file.config,
            trees,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    schema: FeatureSchema,
    config: ModelConfig,
    trees: Vec<NodeRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
enum NodeRepr {
    #[serde(rename = "split_cont")]
    SplitCont {
        feature: String,
        split: f64,
        below: Box<NodeRepr>,
        at_or_above: Box<NodeRepr>,
    },
    #[serde(rename = "split_disc")]
    SplitDisc {
        feature: String,
        children: BTreeMap<String, NodeRepr>,
    },
    #[serde(rename = "leaf")]
    Leaf { label: String },
}

fn encode(schema: &FeatureSchema, tree: &Tree, id: NodeId) -> NodeRepr {
    match tree.node(id) {
        Node::Leaf { label } => NodeRepr::Leaf {
            label: schema
                .label_name(label.expect("only labelled trees are serialized"))
                .to_string(),
        },
        Node::SplitContinuous {
            feature,
            split,
            below,
            at_or_above,
        } => NodeRepr::SplitCont {
            feature: schema.feature(*feature).name.clone(),
            split: *split,
            below: Box::new(encode(schema, tree, *below)),
            at_or_above: Box::new(encode(schema, tree, *at_or_above)),
        },
        Node::SplitDiscrete { feature, children } => {
            let spec = schema.feature(*feature);
            let FeatureKind::Discrete { values } = &spec.kind else {
                unreachable!("discrete split on a continuous feature")
            };
            NodeRepr::SplitDisc {
                feature: spec.name.clone(),
                children: values
                    .iter()
                    .zip(children)
                    .map(|(v, &c)| (v.clone(), encode(schema, tree, c)))
                    .collect(),
            }
        }
    }
}

fn decode(schema: &FeatureSchema, repr: &NodeRepr, nodes: &mut Vec<Node>) -> Result<NodeId> {
    let id = nodes.len();
    nodes.push(Node::Leaf { label: None });
    let feature_index = |name: &str| {
        schema
            .feature_index(name)
            .ok_or_else(|| Error::Model(format!("unknown feature `{name}`")))
    };
    let node = match repr {
        NodeRepr::Leaf { label } => Node::Leaf {
            label: Some(
                schema
                    .label_index(label)
                    .ok_or_else(|| Error::Model(format!("unknown class label `{label}`")))?,
            ),
        },
        NodeRepr::SplitCont {
            feature,
            split,
            below,
            at_or_above,
        } => {
            let feature = feature_index(feature)?;
            let below = decode(schema, below, nodes)?;
            let at_or_above = decode(schema, at_or_above, nodes)?;
            Node::SplitContinuous {
                feature,
                split: *split,
                below,
                at_or_above,
            }
        }
        NodeRepr::SplitDisc { feature, children } => {
            let index = feature_index(feature)?;
            let FeatureKind::Discrete { values } = &schema.feature(index).kind else {
                return Err(Error::Model(format!("`{feature}` is not discrete")));
            };
            if children.len() != values.len() || values.iter().any(|v| !children.contains_key(v)) {
                return Err(Error::Model(format!(
                    "children of `{feature}` do not match its values"
                )));
            }
            let mut ids = Vec::with_capacity(values.len());
            for v in values {
                ids.push(decode(schema, &children[v], nodes)?);
            }
            Node::SplitDiscrete {
                feature: index,
                children: ids,
            }
        }
    };
    nodes[id] = node;
    Ok(id)
}
