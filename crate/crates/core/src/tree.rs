//! Victim decision-tree model.
//!
//! A tree is a set of internal split nodes `x[feature] < threshold → left`
//! (ties go right) and labelled leaves, all sharing one id space. Trees are
//! validated on construction and immutable afterwards.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Format tag of the portable JSON document.
pub const FORMAT_TAG: &str = "barkbeetle-tree-v1";

pub type NodeId = usize;

/// Edge direction taken at a split: `Left` when `x < t`, `Right` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Left,
    Right,
}

impl Branch {
    pub fn flip(self) -> Branch {
        match self {
            Branch::Left => Branch::Right,
            Branch::Right => Branch::Left,
        }
    }

    /// 0 for left, 1 for right.
    pub fn bit(self) -> u8 {
        match self {
            Branch::Left => 0,
            Branch::Right => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Branch {
        if bit == 0 {
            Branch::Left
        } else {
            Branch::Right
        }
    }

    /// Direction a value takes at a split with threshold `t`.
    #[inline]
    pub fn of(value: f64, threshold: f64) -> Branch {
        if value < threshold {
            Branch::Left
        } else {
            Branch::Right
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub index: usize,
    pub min: f64,
    pub max: f64,
}

impl FeatureSpec {
    pub fn new(index: usize, min: f64, max: f64) -> Self {
        FeatureSpec { index, min, max }
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// `d` features sharing the range `[min, max]`.
pub fn uniform_features(d: usize, min: f64, max: f64) -> Vec<FeatureSpec> {
    (0..d).map(|i| FeatureSpec::new(i, min, max)).collect()
}

/// Leaf output. Regression values compare bit-exactly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafLabel {
    Value(f64),
    Class(u32),
}

impl PartialEq for LeafLabel {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (LeafLabel::Value(a), LeafLabel::Value(b)) => a.to_bits() == b.to_bits(),
            (LeafLabel::Class(a), LeafLabel::Class(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for LeafLabel {}

impl Hash for LeafLabel {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            LeafLabel::Value(v) => {
                0u8.hash(state);
                v.to_bits().hash(state);
            }
            LeafLabel::Class(c) => {
                1u8.hash(state);
                c.hash(state);
            }
        }
    }
}

impl fmt::Display for LeafLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeafLabel::Value(v) => write!(f, "{v}"),
            LeafLabel::Class(c) => write!(f, "class {c}"),
        }
    }
}

/// `(feature, threshold, direction)` as taken by one path.
pub type Split = (usize, f64, Branch);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VictimNode {
    pub id: NodeId,
    pub feature: usize,
    pub threshold: f64,
    pub left: NodeId,
    pub right: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VictimLeaf {
    pub id: NodeId,
    pub label: LeafLabel,
}

/// Resolved child reference: index into `nodes` or `leaves`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Split(usize),
    Leaf(usize),
}

/// Root-to-leaf traversal record.
#[derive(Debug, Clone, PartialEq)]
pub struct TracedPath {
    pub node_ids: Vec<NodeId>,
    pub directions: Vec<Branch>,
    pub leaf_id: NodeId,
    pub label: LeafLabel,
}

impl TracedPath {
    /// Number of internal nodes visited (β).
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct VictimTree {
    task: Task,
    features: Vec<FeatureSpec>,
    nodes: Vec<VictimNode>,
    leaves: Vec<VictimLeaf>,
    root: NodeId,
    // resolved structure, derived from the fields above
    links: Vec<(Slot, Slot)>,
    root_slot: Slot,
    leaf_depths: Vec<usize>,
    depth: usize,
}

impl PartialEq for VictimTree {
    fn eq(&self, other: &Self) -> bool {
        self.task == other.task
            && self.features == other.features
            && self.nodes == other.nodes
            && self.leaves == other.leaves
            && self.root == other.root
    }
}

impl VictimTree {
    pub fn new(
        task: Task,
        features: Vec<FeatureSpec>,
        nodes: Vec<VictimNode>,
        leaves: Vec<VictimLeaf>,
        root: NodeId,
    ) -> Result<Self> {
        validate_features(&features)?;

        let mut slots: HashMap<NodeId, Slot> = HashMap::with_capacity(nodes.len() + leaves.len());
        for (i, n) in nodes.iter().enumerate() {
            if slots.insert(n.id, Slot::Split(i)).is_some() {
                return Err(Error::parse("nodes.id", format!("duplicate node id {}", n.id)));
            }
        }
        for (i, l) in leaves.iter().enumerate() {
            if slots.insert(l.id, Slot::Leaf(i)).is_some() {
                return Err(Error::parse("leaves.id", format!("duplicate node id {}", l.id)));
            }
        }

        let d = features.len();
        let mut links = Vec::with_capacity(nodes.len());
        let mut parents: HashMap<NodeId, NodeId> = HashMap::new();
        for n in &nodes {
            if n.feature >= d {
                return Err(Error::parse(
                    "nodes.feature",
                    format!("node {} uses feature {} but only {d} features exist", n.id, n.feature),
                ));
            }
            let spec = &features[n.feature];
            if !n.threshold.is_finite() || n.threshold < spec.min || n.threshold > spec.max {
                return Err(Error::validation(
                    "nodes.threshold",
                    format!(
                        "node {} threshold {} outside feature {} range [{}, {}]",
                        n.id, n.threshold, n.feature, spec.min, spec.max
                    ),
                ));
            }
            if n.left == n.right {
                return Err(Error::validation(
                    "nodes.left",
                    format!("node {} has identical children", n.id),
                ));
            }
            let resolve = |child: NodeId, field: &str| {
                slots.get(&child).copied().ok_or_else(|| {
                    Error::parse(
                        format!("nodes.{field}"),
                        format!("dangling child {child} of node {}", n.id),
                    )
                })
            };
            let left = resolve(n.left, "left")?;
            let right = resolve(n.right, "right")?;
            for child in [n.left, n.right] {
                if let Some(prev) = parents.insert(child, n.id) {
                    return Err(Error::validation(
                        "nodes",
                        format!("node {child} has two parents ({prev} and {})", n.id),
                    ));
                }
            }
            links.push((left, right));
        }

        let root_slot = *slots
            .get(&root)
            .ok_or_else(|| Error::parse("root", format!("dangling root id {root}")))?;
        if parents.contains_key(&root) {
            return Err(Error::validation("root", "root has a parent"));
        }

        // walk from the root; every element must be reached exactly once
        let mut leaf_depths = vec![usize::MAX; leaves.len()];
        let mut seen = 0usize;
        let mut stack = vec![(root_slot, 0usize)];
        let mut depth = 0;
        while let Some((slot, level)) = stack.pop() {
            seen += 1;
            if seen > nodes.len() + leaves.len() {
                return Err(Error::validation("nodes", "cycle detected"));
            }
            match slot {
                Slot::Split(i) => {
                    let (l, r) = links[i];
                    stack.push((r, level + 1));
                    stack.push((l, level + 1));
                }
                Slot::Leaf(i) => {
                    leaf_depths[i] = level;
                    depth = depth.max(level);
                }
            }
        }
        if seen != nodes.len() + leaves.len() {
            return Err(Error::validation(
                "nodes",
                format!(
                    "{} elements unreachable from root",
                    nodes.len() + leaves.len() - seen
                ),
            ));
        }

        validate_labels(task, &leaves, &leaf_depths)?;

        Ok(VictimTree {
            task,
            features,
            nodes,
            leaves,
            root,
            links,
            root_slot,
            leaf_depths,
            depth,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn nodes(&self) -> &[VictimNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[VictimLeaf] {
        &self.leaves
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Number of leaves (α).
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Longest root-to-leaf path, counted in internal nodes (h).
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Path length of each leaf, aligned with [`VictimTree::leaves`].
    pub fn leaf_depths(&self) -> &[usize] {
        &self.leaf_depths
    }

    fn check_dims(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.features.len() {
            return Err(Error::Dimension {
                expected: self.features.len(),
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn infer(&self, x: &[f64]) -> Result<LeafLabel> {
        self.check_dims(x)?;
        let mut slot = self.root_slot;
        loop {
            match slot {
                Slot::Split(i) => {
                    let n = &self.nodes[i];
                    let (l, r) = self.links[i];
                    slot = if x[n.feature] < n.threshold { l } else { r };
                }
                Slot::Leaf(i) => return Ok(self.leaves[i].label),
            }
        }
    }

    pub fn trace(&self, x: &[f64]) -> Result<TracedPath> {
        self.walk(x, None)
    }

    /// Traversal with the comparison at path position `fault.0` forced to
    /// `fault.1`. Every other node is evaluated normally.
    pub(crate) fn walk(&self, x: &[f64], fault: Option<(usize, Branch)>) -> Result<TracedPath> {
        self.check_dims(x)?;
        let mut node_ids = Vec::new();
        let mut directions = Vec::new();
        let mut slot = self.root_slot;
        loop {
            match slot {
                Slot::Split(i) => {
                    let n = &self.nodes[i];
                    let (l, r) = self.links[i];
                    let dir = match fault {
                        Some((pos, forced)) if pos == node_ids.len() => forced,
                        _ => Branch::of(x[n.feature], n.threshold),
                    };
                    node_ids.push(n.id);
                    directions.push(dir);
                    slot = match dir {
                        Branch::Left => l,
                        Branch::Right => r,
                    };
                }
                Slot::Leaf(i) => {
                    if let Some((pos, _)) = fault {
                        if pos >= node_ids.len() {
                            return Err(Error::FaultOutOfRange {
                                position: pos,
                                path_len: node_ids.len(),
                            });
                        }
                    }
                    let leaf = &self.leaves[i];
                    return Ok(TracedPath {
                        node_ids,
                        directions,
                        leaf_id: leaf.id,
                        label: leaf.label,
                    });
                }
            }
        }
    }

    /// Every root-to-leaf path as `(feature, threshold, direction)` triples
    /// plus the leaf label, in left-to-right order.
    pub fn paths(&self) -> Vec<(Vec<Split>, LeafLabel)> {
        let mut out = Vec::with_capacity(self.leaves.len());
        let mut prefix = Vec::new();
        self.collect_paths(self.root_slot, &mut prefix, &mut out);
        out
    }

    fn collect_paths(
        &self,
        slot: Slot,
        prefix: &mut Vec<Split>,
        out: &mut Vec<(Vec<Split>, LeafLabel)>,
    ) {
        match slot {
            Slot::Split(i) => {
                let n = &self.nodes[i];
                let (l, r) = self.links[i];
                prefix.push((n.feature, n.threshold, Branch::Left));
                self.collect_paths(l, prefix, out);
                prefix.pop();
                prefix.push((n.feature, n.threshold, Branch::Right));
                self.collect_paths(r, prefix, out);
                prefix.pop();
            }
            Slot::Leaf(i) => out.push((prefix.clone(), self.leaves[i].label)),
        }
    }

    /// Structural comparison: same shape and same split features everywhere.
    /// Returns the largest threshold difference when the shapes align.
    pub fn aligned_threshold_gap(&self, other: &VictimTree) -> Option<f64> {
        let mut gap = 0.0f64;
        let mut stack = vec![(self.root_slot, other.root_slot)];
        while let Some((a, b)) = stack.pop() {
            match (a, b) {
                (Slot::Split(i), Slot::Split(j)) => {
                    let (na, nb) = (&self.nodes[i], &other.nodes[j]);
                    if na.feature != nb.feature {
                        return None;
                    }
                    gap = gap.max((na.threshold - nb.threshold).abs());
                    let (al, ar) = self.links[i];
                    let (bl, br) = other.links[j];
                    stack.push((al, bl));
                    stack.push((ar, br));
                }
                (Slot::Leaf(i), Slot::Leaf(j)) => {
                    if self.leaves[i].label != other.leaves[j].label {
                        return None;
                    }
                }
                _ => return None,
            }
        }
        Some(gap)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TreeDocument::from(self)).expect("tree serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TreeDocument =
            serde_json::from_str(text).map_err(|e| Error::parse("document", e.to_string()))?;
        doc.into_tree()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn validate_features(features: &[FeatureSpec]) -> Result<()> {
    for (i, f) in features.iter().enumerate() {
        if f.index != i {
            return Err(Error::validation(
                "features.index",
                format!("expected index {i}, found {}", f.index),
            ));
        }
        if !(f.min.is_finite() && f.max.is_finite() && f.min < f.max) {
            return Err(Error::validation(
                "features.min",
                format!("feature {i} needs finite min < max, got [{}, {}]", f.min, f.max),
            ));
        }
    }
    Ok(())
}

fn validate_labels(task: Task, leaves: &[VictimLeaf], depths: &[usize]) -> Result<()> {
    match task {
        Task::Regression => {
            let mut seen = HashSet::new();
            for leaf in leaves {
                match leaf.label {
                    LeafLabel::Value(v) if v.is_finite() => {
                        if !seen.insert(v.to_bits()) {
                            return Err(Error::Unsupported(format!(
                                "regression leaves share the value {v}"
                            )));
                        }
                    }
                    LeafLabel::Value(v) => {
                        return Err(Error::validation(
                            "leaves.label",
                            format!("leaf {} has non-finite value {v}", leaf.id),
                        ))
                    }
                    LeafLabel::Class(_) => {
                        return Err(Error::validation(
                            "leaves.label",
                            format!("leaf {} has a class label in a regression tree", leaf.id),
                        ))
                    }
                }
            }
        }
        Task::Classification => {
            let mut seen = HashSet::new();
            for (leaf, &depth) in leaves.iter().zip(depths) {
                let LeafLabel::Class(c) = leaf.label else {
                    return Err(Error::validation(
                        "leaves.label",
                        format!("leaf {} has a real value in a classification tree", leaf.id),
                    ));
                };
                if !seen.insert((c, depth)) {
                    return Err(Error::Unsupported(format!(
                        "two leaves share class {c} and path length {depth}"
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Bottom-up construction helper. Ids are handed out sequentially.
#[derive(Debug, Clone)]
pub struct TreeBuilder {
    task: Task,
    features: Vec<FeatureSpec>,
    nodes: Vec<VictimNode>,
    leaves: Vec<VictimLeaf>,
    next_id: NodeId,
}

impl TreeBuilder {
    pub fn new(task: Task, features: Vec<FeatureSpec>) -> Self {
        TreeBuilder {
            task,
            features,
            nodes: Vec::new(),
            leaves: Vec::new(),
            next_id: 0,
        }
    }

    pub fn leaf(&mut self, label: LeafLabel) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        self.leaves.push(VictimLeaf { id, label });
        id
    }

    pub fn value(&mut self, v: f64) -> NodeId {
        self.leaf(LeafLabel::Value(v))
    }

    pub fn split(&mut self, feature: usize, threshold: f64, left: NodeId, right: NodeId) -> NodeId {
        let id = self.next_id;
        self.next_id += 1;
        self.nodes.push(VictimNode {
            id,
            feature,
            threshold,
            left,
            right,
        });
        id
    }

    pub fn build(self, root: NodeId) -> Result<VictimTree> {
        VictimTree::new(self.task, self.features, self.nodes, self.leaves, root)
    }
}

#[derive(Serialize, Deserialize)]
struct TreeDocument {
    format: String,
    task: Task,
    features: Vec<FeatureSpec>,
    nodes: Vec<NodeDocument>,
    leaves: Vec<LeafDocument>,
    root: NodeId,
}

#[derive(Serialize, Deserialize)]
struct NodeDocument {
    id: NodeId,
    feature: usize,
    threshold: f64,
    left: NodeId,
    right: NodeId,
}

#[derive(Serialize, Deserialize)]
struct LeafDocument {
    id: NodeId,
    label: serde_json::Number,
}

impl From<&VictimTree> for TreeDocument {
    fn from(t: &VictimTree) -> Self {
        TreeDocument {
            format: FORMAT_TAG.to_string(),
            task: t.task,
            features: t.features.clone(),
            nodes: t
                .nodes
                .iter()
                .map(|n| NodeDocument {
                    id: n.id,
                    feature: n.feature,
                    threshold: n.threshold,
                    left: n.left,
                    right: n.right,
                })
                .collect(),
            leaves: t
                .leaves
                .iter()
                .map(|l| LeafDocument {
                    id: l.id,
                    label: match l.label {
                        LeafLabel::Value(v) => {
                            serde_json::Number::from_f64(v).expect("labels are finite")
                        }
                        LeafLabel::Class(c) => serde_json::Number::from(c),
                    },
                })
                .collect(),
            root: t.root,
        }
    }
}

impl TreeDocument {
    fn into_tree(self) -> Result<VictimTree> {
        if self.format != FORMAT_TAG {
            return Err(Error::parse(
                "format",
                format!("expected {FORMAT_TAG:?}, found {:?}", self.format),
            ));
        }
        let task = self.task;
        let leaves = self
            .leaves
            .into_iter()
            .map(|l| {
                let label = match task {
                    Task::Regression => LeafLabel::Value(l.label.as_f64().ok_or_else(|| {
                        Error::parse("leaves.label", format!("leaf {} label is not a number", l.id))
                    })?),
                    Task::Classification => {
                        let class = l.label.as_u64().and_then(|c| u32::try_from(c).ok());
                        LeafLabel::Class(class.ok_or_else(|| {
                            Error::parse(
                                "leaves.label",
                                format!("leaf {} class must be a non-negative integer", l.id),
                            )
                        })?)
                    }
                };
                Ok(VictimLeaf { id: l.id, label })
            })
            .collect::<Result<Vec<_>>>()?;
        let nodes = self
            .nodes
            .into_iter()
            .map(|n| VictimNode {
                id: n.id,
                feature: n.feature,
                threshold: n.threshold,
                left: n.left,
                right: n.right,
            })
            .collect();
        VictimTree::new(task, self.features, nodes, leaves, self.root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> VictimTree {
        let mut b = TreeBuilder::new(Task::Regression, uniform_features(1, 0.0, 10.0));
        let a = b.value(1.0);
        let c = b.value(2.0);
        let root = b.split(0, 5.0, a, c);
        b.build(root).unwrap()
    }

    /// x0<5 ? (x1<2 ? A : (x0<1 ? B : C)) : D
    fn small() -> VictimTree {
        let mut b = TreeBuilder::new(Task::Regression, uniform_features(2, 0.0, 10.0));
        let a = b.value(10.0);
        let bb = b.value(11.0);
        let c = b.value(12.0);
        let d = b.value(13.0);
        let inner = b.split(0, 1.0, bb, c);
        let mid = b.split(1, 2.0, a, inner);
        let root = b.split(0, 5.0, mid, d);
        b.build(root).unwrap()
    }

    #[test]
    fn strict_less_than_goes_left_and_ties_go_right() {
        let t = stump();
        assert_eq!(t.infer(&[4.9]).unwrap(), LeafLabel::Value(1.0));
        assert_eq!(t.infer(&[5.0]).unwrap(), LeafLabel::Value(2.0));
    }

    #[test]
    fn out_of_range_queries_are_allowed() {
        let t = stump();
        assert_eq!(t.infer(&[-1.0]).unwrap(), LeafLabel::Value(1.0));
        assert_eq!(t.infer(&[11.0]).unwrap(), LeafLabel::Value(2.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let t = stump();
        assert!(matches!(t.infer(&[1.0, 2.0]), Err(Error::Dimension { expected: 1, got: 2 })));
        assert!(matches!(t.trace(&[]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn trace_records_directions() {
        let t = stump();
        let p = t.trace(&[3.0]).unwrap();
        assert_eq!(p.node_ids, vec![t.root()]);
        assert_eq!(p.directions, vec![Branch::Left]);

        let t = small();
        let p = t.trace(&[4.0, 3.0]).unwrap();
        assert_eq!(p.directions, vec![Branch::Left, Branch::Right, Branch::Right]);
        assert_eq!(p.label, LeafLabel::Value(12.0));
    }

    #[test]
    fn stats_are_cached() {
        let t = small();
        assert_eq!(t.leaf_count(), 4);
        assert_eq!(t.depth(), 3);
        let mut depths = t.leaf_depths().to_vec();
        depths.sort();
        assert_eq!(depths, vec![1, 2, 3, 3]);
    }

    #[test]
    fn round_trip_is_identity() {
        let t = small();
        let back = VictimTree::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn document_shape() {
        let v: serde_json::Value = serde_json::from_str(&stump().to_json()).unwrap();
        assert_eq!(v["format"], FORMAT_TAG);
        assert_eq!(v["task"], "regression");
        assert_eq!(v["features"][0]["max"], 10.0);
        assert_eq!(v["nodes"][0]["threshold"], 5.0);
        assert!(v["root"].is_u64());
    }

    fn doc_with(mutate: impl FnOnce(&mut serde_json::Value)) -> Result<VictimTree> {
        let mut v: serde_json::Value = serde_json::from_str(&stump().to_json()).unwrap();
        mutate(&mut v);
        VictimTree::from_json(&v.to_string())
    }

    #[test]
    fn dangling_child_is_a_parse_error() {
        let err = doc_with(|v| v["nodes"][0]["left"] = 99.into()).unwrap_err();
        assert!(err.to_string().contains("dangling child"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn threshold_outside_range_is_rejected() {
        let err = doc_with(|v| v["nodes"][0]["threshold"] = 10.5.into()).unwrap_err();
        assert!(matches!(err, Error::Validation { ref field, .. } if field == "nodes.threshold"));
    }

    #[test]
    fn bad_feature_index_and_duplicate_ids() {
        let err = doc_with(|v| v["nodes"][0]["feature"] = 3.into()).unwrap_err();
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "nodes.feature"));
        let err = doc_with(|v| v["leaves"][1]["id"] = v["leaves"][0]["id"].clone()).unwrap_err();
        assert!(err.to_string().contains("duplicate node id"), "{err}");
        let err = doc_with(|v| v["format"] = "other".into()).unwrap_err();
        assert!(matches!(err, Error::Parse { ref field, .. } if field == "format"));
        let err = doc_with(|v| v["features"][0]["min"] = 20.0.into()).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(VictimTree::from_json("{"), Err(Error::Parse { .. })));
    }

    #[test]
    fn duplicate_regression_values_are_unsupported() {
        let mut b = TreeBuilder::new(Task::Regression, uniform_features(1, 0.0, 10.0));
        let a = b.value(1.0);
        let c = b.value(1.0);
        let root = b.split(0, 5.0, a, c);
        assert!(matches!(b.build(root), Err(Error::Unsupported(_))));
    }

    #[test]
    fn classification_needs_unique_class_and_length() {
        let mut b = TreeBuilder::new(Task::Classification, uniform_features(1, 0.0, 10.0));
        let a = b.leaf(LeafLabel::Class(0));
        let c = b.leaf(LeafLabel::Class(1));
        let e = b.leaf(LeafLabel::Class(0));
        let inner = b.split(0, 7.0, c, e);
        let root = b.split(0, 5.0, a, inner);
        // class 0 at lengths 1 and 2: supported
        let t = b.build(root).unwrap();
        let back = VictimTree::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);

        let mut b = TreeBuilder::new(Task::Classification, uniform_features(1, 0.0, 10.0));
        let a = b.leaf(LeafLabel::Class(0));
        let c = b.leaf(LeafLabel::Class(0));
        let root = b.split(0, 5.0, a, c);
        let err = b.build(root).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn two_parents_rejected() {
        let mut b = TreeBuilder::new(Task::Regression, uniform_features(1, 0.0, 10.0));
        let a = b.value(1.0);
        let c = b.value(2.0);
        let inner = b.split(0, 7.0, a, c);
        let root = b.split(0, 5.0, inner, a);
        assert!(b.build(root).is_err());
    }

    #[test]
    fn paths_enumerates_leaves_left_to_right() {
        let t = small();
        let paths = t.paths();
        assert_eq!(paths.len(), 4);
        assert_eq!(paths[0].1, LeafLabel::Value(10.0));
        assert_eq!(paths[3].0, vec![(0, 5.0, Branch::Right)]);
    }

    #[test]
    fn fault_out_of_range() {
        let t = stump();
        let err = t.walk(&[1.0], Some((1, Branch::Left))).unwrap_err();
        assert!(matches!(err, Error::FaultOutOfRange { position: 1, path_len: 1 }));
    }
}
