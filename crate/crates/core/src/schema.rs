//! Public feature schema: feature domains and the class-label domain.
//!
//! The schema is assumed to be public knowledge. Tree structure is derived
//! from it alone, so nothing in here may ever be computed from private data.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a class label in [`FeatureSchema::class_labels`].
pub type LabelId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous { lower: f64, upper: f64 },
    Discrete { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Continuous { lower, upper },
        }
    }

    pub fn discrete<S: Into<String>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        FeatureSpec {
            name: name.into(),
            kind: FeatureKind::Discrete {
                values: values.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_continuous(&self) -> bool {
        matches!(self.kind, FeatureKind::Continuous { .. })
    }

    /// Position of `value` in a discrete feature's value list.
    pub fn value_index(&self, value: &str) -> Option<usize> {
        match &self.kind {
            FeatureKind::Discrete { values } => values.iter().position(|v| v == value),
            FeatureKind::Continuous { .. } => None,
        }
    }
}

/// Validated schema. Construct with [`FeatureSchema::new`] or by
/// deserializing; both run the same checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchema")]
pub struct FeatureSchema {
    features: Vec<FeatureSpec>,
    label_column: String,
    class_labels: Vec<String>,
}

#[derive(Deserialize)]
struct RawSchema {
    features: Vec<FeatureSpec>,
    label_column: String,
    class_labels: Vec<String>,
}

impl TryFrom<RawSchema> for FeatureSchema {
    type Error = Error;

    fn try_from(raw: RawSchema) -> Result<Self> {
        FeatureSchema::new(raw.features, raw.label_column, raw.class_labels)
    }
}

impl FeatureSchema {
    pub fn new(
        features: Vec<FeatureSpec>,
        label_column: impl Into<String>,
        class_labels: Vec<String>,
    ) -> Result<Self> {
        let label_column = label_column.into();
        let mut names = HashSet::new();
        for f in &features {
            if f.name.is_empty() {
                return Err(Error::Schema("feature with empty name".into()));
            }
            if !names.insert(f.name.as_str()) {
                return Err(Error::Schema(format!(
                    "duplicate feature name `{}`",
                    f.name
                )));
            }
            match &f.kind {
                FeatureKind::Continuous { lower, upper } => {
                    if !lower.is_finite() || !upper.is_finite() {
                        return Err(Error::Schema(format!(
                            "feature `{}`: bounds must be finite",
                            f.name
                        )));
                    }
                    if lower >= upper {
                        return Err(Error::Schema(format!(
                            "feature `{}`: lower bound {lower} must be below upper bound {upper}",
                            f.name
                        )));
                    }
                }
                FeatureKind::Discrete { values } => {
                    let distinct: HashSet<&String> = values.iter().collect();
                    if distinct.len() != values.len() {
                        return Err(Error::Schema(format!(
                            "feature `{}`: duplicate discrete values",
                            f.name
                        )));
                    }
                    if values.len() < 2 {
                        return Err(Error::Schema(format!(
                            "feature `{}`: needs at least 2 discrete values",
                            f.name
                        )));
                    }
                }
            }
        }
        if label_column.is_empty() {
            return Err(Error::Schema("label_column is empty".into()));
        }
        if names.contains(label_column.as_str()) {
            return Err(Error::Schema(format!(
                "label column `{label_column}` collides with a feature name"
            )));
        }
        let distinct: HashSet<&String> = class_labels.iter().collect();
        if distinct.len() != class_labels.len() {
            return Err(Error::Schema("duplicate class labels".into()));
        }
        if class_labels.len() < 2 {
            return Err(Error::Schema(format!(
                "need at least 2 class labels, got {}",
                class_labels.len()
            )));
        }
        Ok(FeatureSchema {
            features,
            label_column,
            class_labels,
        })
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> &FeatureSpec {
        &self.features[index]
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn num_labels(&self) -> usize {
        self.class_labels.len()
    }

    pub fn label_index(&self, label: &str) -> Option<LabelId> {
        self.class_labels.iter().position(|l| l == label)
    }

    pub fn label_name(&self, id: LabelId) -> &str {
        &self.class_labels[id]
    }

    /// Number of continuous features (s).
    pub fn num_continuous(&self) -> usize {
        self.features.iter().filter(|f| f.is_continuous()).count()
    }

    /// Number of discrete features (r).
    pub fn num_discrete(&self) -> usize {
        self.features.len() - self.num_continuous()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| match source.classify() {
            // try_from failures surface as data errors; keep the message readable
            serde_json::error::Category::Data => Error::Schema(source.to_string()),
            _ => Error::Json {
                context: "schema".into(),
                source,
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schema serialization is infallible")
    }
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<FeatureSchema> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    FeatureSchema::from_json(&text).map_err(|e| match e {
        Error::Json { source, .. } => Error::Json {
            context: path.display().to_string(),
            source,
        },
        Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
        other => other,
    })
}
