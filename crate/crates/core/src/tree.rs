//! Random decision trees built from the public schema alone.
//!
//! Split features and split points are drawn at random, so building a tree
//! never reads a record. Leaves start unlabelled; labels are filled in later
//! by the forest through the private label query.

use rand::Rng;

use crate::data::{FeatureValue, Record};
use crate::error::{Error, Result};
use crate::schema::{FeatureKind, FeatureSchema, LabelId};

pub type NodeId = usize;

/// Continuous domains narrower than this are no longer split.
pub const MIN_SPLIT_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    /// Values `< split` go to `below`, the rest to `at_or_above`.
    SplitContinuous {
        feature: usize,
        split: f64,
        below: NodeId,
        at_or_above: NodeId,
    },
    /// One child per discrete value, in schema value order.
    SplitDiscrete {
        feature: usize,
        children: Vec<NodeId>,
    },
    Leaf {
        label: Option<LabelId>,
    },
}

/// Arena-allocated tree; the root is node 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        Tree { nodes }
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaves(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n, Node::Leaf { .. }))
            .map(|(i, _)| i)
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Longest root-to-leaf path, counted in internal nodes.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, id: NodeId) -> usize {
            match &t.nodes[id] {
                Node::Leaf { .. } => 0,
                Node::SplitContinuous {
                    below, at_or_above, ..
                } => 1 + walk(t, *below).max(walk(t, *at_or_above)),
                Node::SplitDiscrete { children, .. } => {
                    1 + children.iter().map(|&c| walk(t, c)).max().unwrap_or(0)
                }
            }
        }
        walk(self, self.root())
    }

    pub fn label(&self, leaf: NodeId) -> Option<LabelId> {
        match self.nodes[leaf] {
            Node::Leaf { label } => label,
            _ => None,
        }
    }

    pub(crate) fn set_label(&mut self, leaf: NodeId, label: LabelId) {
        match &mut self.nodes[leaf] {
            Node::Leaf { label: l } => *l = Some(label),
            _ => panic!("node {leaf} is not a leaf"),
        }
    }

    pub fn is_fully_labelled(&self) -> bool {
        self.nodes
            .iter()
            .all(|n| !matches!(n, Node::Leaf { label: None }))
    }

    /// Follow the splits for `values` down to a leaf.
    pub fn route(&self, values: &[FeatureValue]) -> NodeId {
        let mut id = self.root();
        loop {
            match &self.nodes[id] {
                Node::Leaf { .. } => return id,
                Node::SplitContinuous {
                    feature,
                    split,
                    below,
                    at_or_above,
                } => {
                    let FeatureValue::Continuous(v) = values[*feature] else {
                        panic!("feature {feature} is not continuous in this record");
                    };
                    id = if v < *split { *below } else { *at_or_above };
                }
                Node::SplitDiscrete { feature, children } => {
                    let FeatureValue::Discrete(v) = values[*feature] else {
                        panic!("feature {feature} is not discrete in this record");
                    };
                    id = children[v];
                }
            }
        }
    }

    pub fn route_record(&self, record: &Record) -> NodeId {
        self.route(&record.values)
    }

    /// Check the structural invariants against `schema`: every continuous
    /// split lies strictly inside its inherited interval, a discrete feature
    /// is tested at most once per path and has one child per value, and
    /// every node is reachable exactly once.
    pub fn validate(&self, schema: &FeatureSchema, require_labels: bool) -> Result<()> {
        let mut domains: Vec<(f64, f64)> = schema
            .features()
            .iter()
            .map(|f| match f.kind {
                FeatureKind::Continuous { lower, upper } => (lower, upper),
                FeatureKind::Discrete { .. } => (0.0, 0.0),
            })
            .collect();
        let mut used = vec![false; schema.features().len()];
        let mut seen = vec![false; self.nodes.len()];
        if self.nodes.is_empty() {
            return Err(Error::Model("tree has no nodes".into()));
        }
        self.validate_node(
            self.root(),
            schema,
            require_labels,
            &mut domains,
            &mut used,
            &mut seen,
        )?;
        if seen.iter().any(|s| !s) {
            return Err(Error::Model("tree has unreachable nodes".into()));
        }
        Ok(())
    }

    fn validate_node(
        &self,
        id: NodeId,
        schema: &FeatureSchema,
        require_labels: bool,
        domains: &mut [(f64, f64)],
        used: &mut [bool],
        seen: &mut [bool],
    ) -> Result<()> {
        let Some(slot) = seen.get_mut(id) else {
            return Err(Error::Model(format!("node {id} out of range")));
        };
        if *slot {
            return Err(Error::Model(format!("node {id} reached twice")));
        }
        *slot = true;
        let feature_spec = |f: usize| {
            schema
                .features()
                .get(f)
                .ok_or_else(|| Error::Model(format!("unknown feature index {f}")))
        };
        match &self.nodes[id] {
            Node::Leaf { label } => match label {
                Some(l) if *l >= schema.num_labels() => {
                    Err(Error::Model(format!("leaf label index {l} out of range")))
                }
                None if require_labels => Err(Error::Model("leaf without a label".into())),
                _ => Ok(()),
            },
            Node::SplitContinuous {
                feature,
                split,
                below,
                at_or_above,
            } => {
                let spec = feature_spec(*feature)?;
                if !spec.is_continuous() {
                    return Err(Error::Model(format!("`{}` is not continuous", spec.name)));
                }
                let (lo, hi) = domains[*feature];
                if !(lo < *split && *split < hi) {
                    return Err(Error::Model(format!(
                        "split {split} on `{}` outside its domain ({lo}, {hi})",
                        spec.name
                    )));
                }
                domains[*feature] = (lo, *split);
                self.validate_node(*below, schema, require_labels, domains, used, seen)?;
                domains[*feature] = (*split, hi);
                self.validate_node(*at_or_above, schema, require_labels, domains, used, seen)?;
                domains[*feature] = (lo, hi);
                Ok(())
            }
            Node::SplitDiscrete { feature, children } => {
                let spec = feature_spec(*feature)?;
                let FeatureKind::Discrete { values } = &spec.kind else {
                    return Err(Error::Model(format!("`{}` is not discrete", spec.name)));
                };
                if used[*feature] {
                    return Err(Error::Model(format!(
                        "discrete feature `{}` tested twice on one path",
                        spec.name
                    )));
                }
                if children.len() != values.len() {
                    return Err(Error::Model(format!(
                        "`{}` has {} children for {} values",
                        spec.name,
                        children.len(),
                        values.len()
                    )));
                }
                used[*feature] = true;
                for &c in children {
                    self.validate_node(c, schema, require_labels, domains, used, seen)?;
                }
                used[*feature] = false;
                Ok(())
            }
        }
    }
}

/// Expected number of continuous features never tested on a path of `d`
/// uniformly chosen tests: `s·((s-1)/s)^d`.
pub fn expected_untested(s: usize, d: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::param("need at least one continuous feature"));
    }
    let s = s as f64;
    Ok(s * ((s - 1.0) / s).powi(d as i32))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DepthParams {
    /// Continuous feature count.
    pub s: usize,
    /// Discrete feature count.
    pub r: usize,
    pub continuous_depth: usize,
    pub discrete_depth: usize,
    pub depth: usize,
}

/// Tree depth for `s` continuous and `r` discrete features.
///
/// The continuous part is one more than the smallest `d` at which fewer than
/// half the continuous features are expected to remain untested; the discrete
/// part is `⌈r/2⌉`.
pub fn optimal_depth(s: usize, r: usize) -> Result<DepthParams> {
    if s == 0 && r == 0 {
        return Err(Error::param("schema has no features"));
    }
    let continuous_depth = if s == 0 {
        0
    } else {
        let half = s as f64 / 2.0;
        let mut d = 0;
        while expected_untested(s, d)? >= half {
            d += 1;
        }
        d + 1
    };
    let discrete_depth = r.div_ceil(2);
    Ok(DepthParams {
        s,
        r,
        continuous_depth,
        discrete_depth,
        depth: continuous_depth + discrete_depth,
    })
}

pub fn optimal_depth_for(schema: &FeatureSchema) -> Result<DepthParams> {
    optimal_depth(schema.num_continuous(), schema.num_discrete())
}

fn splittable(lo: f64, hi: f64) -> bool {
    let mid = lo + (hi - lo) / 2.0;
    hi - lo >= MIN_SPLIT_WIDTH && lo < mid && mid < hi
}

/// Uniform point strictly inside `(lo, hi)`.
fn sample_open<R: Rng + ?Sized>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    for _ in 0..64 {
        let p = lo + (hi - lo) * rng.random::<f64>();
        if lo < p && p < hi {
            return p;
        }
    }
    lo + (hi - lo) / 2.0
}

struct Builder<'a, R: ?Sized> {
    schema: &'a FeatureSchema,
    max_depth: usize,
    nodes: Vec<Node>,
    domains: Vec<(f64, f64)>,
    used: Vec<bool>,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn candidates(&self) -> Vec<usize> {
        self.schema
            .features()
            .iter()
            .enumerate()
            .filter(|(i, f)| match f.kind {
                FeatureKind::Continuous { .. } => {
                    let (lo, hi) = self.domains[*i];
                    splittable(lo, hi)
                }
                FeatureKind::Discrete { .. } => !self.used[*i],
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn grow(&mut self, level: usize) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { label: None });
        if level >= self.max_depth {
            return id;
        }
        let candidates = self.candidates();
        if candidates.is_empty() {
            return id;
        }
        let feature = candidates[self.rng.random_range(0..candidates.len())];
        match &self.schema.feature(feature).kind {
            FeatureKind::Continuous { .. } => {
                let (lo, hi) = self.domains[feature];
                let split = sample_open(lo, hi, self.rng);
                self.domains[feature] = (lo, split);
                let below = self.grow(level + 1);
                self.domains[feature] = (split, hi);
                let at_or_above = self.grow(level + 1);
                self.domains[feature] = (lo, hi);
                self.nodes[id] = Node::SplitContinuous {
                    feature,
                    split,
                    below,
                    at_or_above,
                };
            }
            FeatureKind::Discrete { values } => {
                let arity = values.len();
                self.used[feature] = true;
                let children = (0..arity).map(|_| self.grow(level + 1)).collect();
                self.used[feature] = false;
                self.nodes[id] = Node::SplitDiscrete { feature, children };
            }
        }
        id
    }
}

/// Grow one random tree of at most `depth` levels from the schema.
pub fn build_tree<R: Rng + ?Sized>(
    schema: &FeatureSchema,
    depth: usize,
    rng: &mut R,
) -> Result<Tree> {
    if depth < 1 {
        return Err(Error::param("tree depth must be at least 1"));
    }
    if schema.features().is_empty() {
        return Err(Error::param("schema has no features"));
    }
    let domains = schema
        .features()
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Continuous { lower, upper } => (lower, upper),
            FeatureKind::Discrete { .. } => (0.0, 0.0),
        })
        .collect();
    let mut b = Builder {
        schema,
        max_depth: depth,
        nodes: Vec::new(),
        domains,
        used: vec![false; schema.features().len()],
        rng,
    };
    b.grow(0);
    Ok(Tree { nodes: b.nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::schema::FeatureSpec;
    use proptest::prelude::*;

    fn schema(features: Vec<FeatureSpec>) -> FeatureSchema {
        FeatureSchema::new(features, "y", vec!["A".into(), "B".into()]).unwrap()
    }

    /// Root-to-leaf paths as lists of (feature, branch) pairs.
    fn paths(t: &Tree) -> Vec<Vec<(usize, usize)>> {
        fn walk(
            t: &Tree,
            id: NodeId,
            path: &mut Vec<(usize, usize)>,
            out: &mut Vec<Vec<(usize, usize)>>,
        ) {
            match t.node(id) {
                Node::Leaf { .. } => out.push(path.clone()),
                Node::SplitContinuous {
                    feature,
                    below,
                    at_or_above,
                    ..
                } => {
                    for (b, c) in [(0, *below), (1, *at_or_above)] {
                        path.push((*feature, b));
                        walk(t, c, path, out);
                        path.pop();
                    }
                }
                Node::SplitDiscrete { feature, children } => {
                    for (b, &c) in children.iter().enumerate() {
                        path.push((*feature, b));
                        walk(t, c, path, out);
                        path.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(t, t.root(), &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn expected_untested_examples() {
        assert_eq!(expected_untested(5, 0).unwrap(), 5.0);
        assert_eq!(expected_untested(1, 1).unwrap(), 0.0);
        assert!((expected_untested(5, 5).unwrap() - 1.6384).abs() < 1e-12);
        assert!(expected_untested(0, 3).is_err());
    }

    #[test]
    fn reference_depths() {
        let rows = [
            (5, 0, 5),
            (10, 0, 8),
            (15, 0, 12),
            (15, 0, 12),
            (15, 0, 12),
            (10, 0, 8),
            (20, 0, 15),
            (4, 0, 4),
            (16, 0, 12),
            (10, 0, 8),
            (6, 8, 9),
            (0, 22, 11),
            (0, 16, 8),
            (0, 8, 4),
        ];
        for (s, r, d) in rows {
            assert_eq!(optimal_depth(s, r).unwrap().depth, d, "s={s} r={r}");
        }
        assert!(optimal_depth(0, 0).is_err());
    }

    #[test]
    fn odd_discrete_counts_round_up() {
        assert_eq!(optimal_depth(0, 1).unwrap().depth, 1);
        assert_eq!(optimal_depth(0, 3).unwrap().depth, 2);
    }

    #[test]
    fn two_binary_discrete_features() {
        let s = schema(vec![
            FeatureSpec::discrete("a", ["0", "1"]),
            FeatureSpec::discrete("b", ["0", "1"]),
        ]);
        for seed in 0..20 {
            let t = build_tree(&s, 2, &mut rng::from_seed(seed)).unwrap();
            assert_eq!(t.num_leaves(), 4);
            for p in paths(&t) {
                let mut fs: Vec<usize> = p.iter().map(|x| x.0).collect();
                fs.sort_unstable();
                assert_eq!(fs, vec![0, 1]);
            }
        }
    }

    #[test]
    fn one_continuous_feature_nests_splits() {
        let s = schema(vec![FeatureSpec::continuous("x", 0.0, 1.0)]);
        for seed in 0..50 {
            let t = build_tree(&s, 3, &mut rng::from_seed(seed)).unwrap();
            assert_eq!(t.num_leaves(), 8);
            assert_eq!(t.depth(), 3);
            t.validate(&s, false).unwrap();
        }
    }

    #[test]
    fn lone_discrete_feature_stops_early() {
        let s = schema(vec![FeatureSpec::discrete("a", ["x", "y", "z"])]);
        let t = build_tree(&s, 5, &mut rng::from_seed(1)).unwrap();
        assert_eq!(t.depth(), 1);
        assert_eq!(t.num_leaves(), 3);
    }

    #[test]
    fn zero_depth_rejected() {
        let s = schema(vec![FeatureSpec::continuous("x", 0.0, 1.0)]);
        assert!(build_tree(&s, 0, &mut rng::from_seed(1)).is_err());
    }

    #[test]
    fn routing_boundary_rule() {
        let t = Tree::from_nodes(vec![
            Node::SplitContinuous {
                feature: 0,
                split: 0.5,
                below: 1,
                at_or_above: 2,
            },
            Node::Leaf { label: None },
            Node::SplitDiscrete {
                feature: 1,
                children: vec![3, 4],
            },
            Node::Leaf { label: None },
            Node::Leaf { label: None },
        ]);
        use FeatureValue::*;
        assert_eq!(t.route(&[Continuous(0.3), Discrete(0)]), 1);
        assert_eq!(t.route(&[Continuous(0.5), Discrete(0)]), 3);
        assert_eq!(t.route(&[Continuous(0.9), Discrete(1)]), 4);
    }

    #[test]
    fn narrow_domains_are_not_split() {
        let s = schema(vec![FeatureSpec::continuous("x", 1e5, 1e5 + 3e-11)]);
        for seed in 0..20 {
            let t = build_tree(&s, 30, &mut rng::from_seed(seed)).unwrap();
            t.validate(&s, false).unwrap();
            assert!(t.depth() < 30);
        }
    }

    #[test]
    fn validate_catches_repeated_discrete_feature() {
        let s = schema(vec![FeatureSpec::discrete("a", ["x", "y"])]);
        let t = Tree::from_nodes(vec![
            Node::SplitDiscrete {
                feature: 0,
                children: vec![1, 2],
            },
            Node::SplitDiscrete {
                feature: 0,
                children: vec![3, 4],
            },
            Node::Leaf { label: None },
            Node::Leaf { label: None },
            Node::Leaf { label: None },
        ]);
        assert!(t.validate(&s, false).is_err());
    }

    proptest! {
        #[test]
        fn equal_arity_discrete_trees_are_full(r in 1usize..5, v in 2usize..4, extra in 0usize..2, seed: u64) {
            let d = r.saturating_sub(extra).max(1);
            let values: Vec<String> = (0..v).map(|i| i.to_string()).collect();
            let feats = (0..r).map(|i| FeatureSpec::discrete(format!("f{i}"), values.clone())).collect();
            let s = schema(feats);
            let t = build_tree(&s, d, &mut rng::from_seed(seed)).unwrap();
            prop_assert_eq!(t.num_leaves(), v.pow(d as u32));
            for p in paths(&t) {
                prop_assert_eq!(p.len(), d);
            }
            t.validate(&s, false).unwrap();
        }

        #[test]
        fn mixed_trees_satisfy_invariants(n_cont in 0usize..4, n_disc in 0usize..4, depth in 1usize..8, seed: u64) {
            prop_assume!(n_cont + n_disc > 0);
            let mut feats = Vec::new();
            for i in 0..n_cont {
                feats.push(FeatureSpec::continuous(format!("c{i}"), -1.0, 2.0));
            }
            for i in 0..n_disc {
                feats.push(FeatureSpec::discrete(format!("d{i}"), ["p", "q", "r"]));
            }
            let s = schema(feats);
            let t = build_tree(&s, depth, &mut rng::from_seed(seed)).unwrap();
            prop_assert!(t.depth() <= depth);
            t.validate(&s, false).unwrap();
            let again = build_tree(&s, depth, &mut rng::from_seed(seed)).unwrap();
            prop_assert_eq!(&t, &again);

            // routing sends every record to exactly one leaf
            use rand::Rng as _;
            let mut r = rng::from_seed(seed ^ 1);
            let mut per_leaf = vec![0usize; t.nodes().len()];
            let n = 200;
            for _ in 0..n {
                let values: Vec<FeatureValue> = s
                    .features()
                    .iter()
                    .map(|f| if f.is_continuous() {
                        FeatureValue::Continuous(r.random_range(-1.0..=2.0))
                    } else {
                        FeatureValue::Discrete(r.random_range(0..3))
                    })
                    .collect();
                let leaf = t.route(&values);
                let is_leaf = matches!(t.node(leaf), Node::Leaf { .. });
                prop_assert!(is_leaf);
                per_leaf[leaf] += 1;
            }
            prop_assert_eq!(t.leaves().map(|l| per_leaf[l]).sum::<usize>(), n);
        }
    }
}
