//! Differentially private random decision forests.
//!
//! Tree structure is drawn from the feature schema alone, so building a tree
//! never reads a record. Training data only enters through the leaf labels,
//! each released with the exponential mechanism scaled by smooth (or global)
//! sensitivity of the majority-label query. Trees are trained on disjoint
//! subsets of the data, so each pays the full budget under parallel
//! composition.
//!
//! ```
//! use dpforest::{rng, synth, train, Epsilon, TrainConfig};
//!
//! let data = synth::generate(synth::SYNTH_A, 2_000, &mut rng::from_seed(7)).unwrap();
//! let config = TrainConfig::new(Epsilon::new(1.0).unwrap()).with_trees(10).with_seed(7);
//! let out = train(&data, &config).unwrap();
//! assert_eq!(out.model.trees().len(), 10);
//! assert_eq!(out.ledger.composed_cost(), 1.0);
//! ```

pub mod data;
pub mod dp;
pub mod error;
pub mod eval;
pub mod forest;
pub mod model;
pub mod rng;
pub mod schema;
pub mod synth;
pub mod tree;

pub use data::{
    load_dataset, partition_disjoint, read_dataset, save_dataset, write_dataset, AccessCounter,
    Dataset, DatasetView, DisjointPartition, FeatureValue, Record, RecordSource,
};
pub use dp::{BudgetLedger, Epsilon, LabelCounts, SelectionMode, SensitivityMode};
pub use error::{Error, ErrorClass, Result};
pub use eval::{cross_validate, EvalReport};
pub use forest::{build_forest, train, TrainConfig, TrainOutput};
pub use model::{BudgetMode, ForestModel, ModelConfig};
pub use schema::{load_schema, FeatureKind, FeatureSchema, FeatureSpec, LabelId};
pub use tree::{build_tree, optimal_depth, optimal_depth_for, Tree};
