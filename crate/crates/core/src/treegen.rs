//! Ground-truth tree generation.
//!
//! Trees are built in two passes: a shape (splits with features, leaves)
//! and then thresholds, drawn top-down inside the box each node inherits.
//! When a feature recurs below a node, the draw leaves room for every
//! later occurrence, so all splits stay reachable and at least
//! `min_threshold_gap` apart from the box edges.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{uniform_features, FeatureSpec, LeafLabel, NodeId, Task, TreeBuilder, VictimTree};

pub const DEFAULT_MIN: f64 = 0.0;
pub const DEFAULT_MAX: f64 = 10.0;
pub const DEFAULT_GAP: f64 = 0.01;

fn default_gap() -> f64 {
    DEFAULT_GAP
}

fn default_task() -> Task {
    Task::Regression
}

/// Complete tree with a fixed number of duplicated features per path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub depth: usize,
    pub n_features: usize,
    #[serde(default)]
    pub duplicates_per_path: usize,
    #[serde(default = "default_task")]
    pub task: Task,
    #[serde(default = "default_gap")]
    pub min_threshold_gap: f64,
    #[serde(default)]
    pub seed: u64,
}

impl GenSpec {
    pub fn new(depth: usize, n_features: usize, duplicates_per_path: usize, seed: u64) -> Self {
        GenSpec {
            depth,
            n_features,
            duplicates_per_path,
            task: Task::Regression,
            min_threshold_gap: DEFAULT_GAP,
            seed,
        }
    }
}

/// Random tree with a fixed leaf count and bounded depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub leaves: usize,
    pub depth_max: usize,
    pub n_features: usize,
    #[serde(default = "default_task")]
    pub task: Task,
    #[serde(default = "default_gap")]
    pub min_threshold_gap: f64,
    #[serde(default)]
    pub seed: u64,
}

enum Shape {
    Split { feature: usize, left: usize, right: usize },
    Leaf,
}

struct Skeleton {
    shapes: Vec<Shape>,
}

impl Skeleton {
    fn root(&self) -> usize {
        0
    }

    /// Narrowest box along `feature` that keeps every split of the subtree
    /// at `i` on that feature at least `gap` from its neighbours.
    fn room(&self, i: usize, feature: usize, gap: f64) -> f64 {
        match self.shapes[i] {
            Shape::Leaf => 0.0,
            Shape::Split {
                feature: f,
                left,
                right,
            } => {
                let l = self.room(left, feature, gap);
                let r = self.room(right, feature, gap);
                if f == feature {
                    l.max(gap) + r.max(gap)
                } else {
                    l.max(r)
                }
            }
        }
    }

    fn leaf_depths(&self) -> HashMap<usize, usize> {
        let mut out = HashMap::new();
        let mut stack = vec![(self.root(), 0)];
        while let Some((i, d)) = stack.pop() {
            match self.shapes[i] {
                Shape::Leaf => {
                    out.insert(i, d);
                }
                Shape::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
            }
        }
        out
    }
}

fn check_common(n_features: usize, gap: f64) -> Result<()> {
    if n_features == 0 {
        return Err(Error::Generation("at least one feature is required".into()));
    }
    if !(gap > 0.0) || gap * 2.0 >= DEFAULT_MAX - DEFAULT_MIN {
        return Err(Error::Generation(format!("threshold gap {gap} does not fit the range")));
    }
    Ok(())
}

/// Turns a skeleton into a validated tree: thresholds, then labels.
fn realize(
    skeleton: &Skeleton,
    task: Task,
    n_features: usize,
    gap: f64,
    rng: &mut ChaCha8Rng,
) -> Result<VictimTree> {
    let features = uniform_features(n_features, DEFAULT_MIN, DEFAULT_MAX);
    let mut thresholds = vec![f64::NAN; skeleton.shapes.len()];
    let boxes: Vec<(f64, f64)> = features.iter().map(|f| (f.min, f.max)).collect();
    let mut stack = vec![(skeleton.root(), boxes)];
    while let Some((i, bx)) = stack.pop() {
        let Shape::Split { feature, left, right } = skeleton.shapes[i] else {
            continue;
        };
        let (lo, hi) = bx[feature];
        let a = lo + skeleton.room(left, feature, gap).max(gap);
        let b = hi - skeleton.room(right, feature, gap).max(gap);
        if a > b {
            return Err(Error::Generation(format!(
                "feature {feature} cannot host the splits below node {i} in [{lo}, {hi}] with gap {gap}"
            )));
        }
        let t = if a == b { a } else { rng.gen_range(a..b) };
        thresholds[i] = t;
        let mut lb = bx.clone();
        lb[feature] = (lo, t);
        let mut rb = bx;
        rb[feature] = (t, hi);
        stack.push((right, rb));
        stack.push((left, lb));
    }

    let labels = assign_labels(skeleton, task, rng);
    let mut builder = TreeBuilder::new(task, features);
    let root = emit(skeleton, skeleton.root(), &thresholds, &labels, &mut builder);
    builder.build(root)
}

fn assign_labels(skeleton: &Skeleton, task: Task, rng: &mut ChaCha8Rng) -> HashMap<usize, LeafLabel> {
    let depths = skeleton.leaf_depths();
    let mut leaves: Vec<usize> = depths.keys().copied().collect();
    leaves.sort_unstable();
    let mut out = HashMap::with_capacity(leaves.len());
    match task {
        Task::Regression => {
            let mut seen = HashSet::new();
            for &i in &leaves {
                let v = loop {
                    let v = (rng.gen_range(0.0..1000.0f64) * 1e4).round() / 1e4;
                    if seen.insert(v.to_bits()) {
                        break v;
                    }
                };
                out.insert(i, LeafLabel::Value(v));
            }
        }
        Task::Classification => {
            // classes only need to be unique among leaves of equal depth
            let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
            for &i in &leaves {
                groups.entry(depths[&i]).or_default().push(i);
            }
            let mut keys: Vec<usize> = groups.keys().copied().collect();
            keys.sort_unstable();
            for k in keys {
                let group = &groups[&k];
                let mut classes: Vec<u32> = (0..group.len() as u32).collect();
                classes.shuffle(rng);
                for (&i, c) in group.iter().zip(classes) {
                    out.insert(i, LeafLabel::Class(c));
                }
            }
        }
    }
    out
}

fn emit(
    skeleton: &Skeleton,
    i: usize,
    thresholds: &[f64],
    labels: &HashMap<usize, LeafLabel>,
    b: &mut TreeBuilder,
) -> NodeId {
    match skeleton.shapes[i] {
        Shape::Leaf => b.leaf(labels[&i]),
        Shape::Split { feature, left, right } => {
            let l = emit(skeleton, left, thresholds, labels, b);
            let r = emit(skeleton, right, thresholds, labels, b);
            b.split(feature, thresholds[i], l, r)
        }
    }
}

/// Random tree with exactly `leaves` leaves and depth at most `depth_max`,
/// using the default range and gap.
pub fn gen_random(
    leaves: usize,
    depth_max: usize,
    n_features: usize,
    task: Task,
    seed: u64,
) -> Result<VictimTree> {
    gen_random_with(&RandomSpec {
        leaves,
        depth_max,
        n_features,
        task,
        min_threshold_gap: DEFAULT_GAP,
        seed,
    })
}

pub fn gen_random_with(spec: &RandomSpec) -> Result<VictimTree> {
    check_common(spec.n_features, spec.min_threshold_gap)?;
    if spec.leaves < 2 {
        return Err(Error::Generation("a tree needs at least 2 leaves".into()));
    }
    let fits = spec.depth_max >= usize::BITS as usize - 1 || spec.leaves <= 1usize << spec.depth_max;
    if !fits {
        return Err(Error::Generation(format!(
            "{} leaves do not fit in depth {}",
            spec.leaves, spec.depth_max
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // shape: a spine down to the deepest allowed level, then random growth
    let mut children: Vec<Option<(usize, usize)>> = vec![None];
    let mut depth = vec![0usize];
    let mut open: Vec<usize> = vec![0];
    let mut count = 1;
    let spine = spec.depth_max.min(spec.leaves - 1);
    let mut tip = 0;
    for _ in 0..spine {
        let (l, r) = (children.len(), children.len() + 1);
        children[tip] = Some((l, r));
        children.extend([None, None]);
        depth.extend([depth[tip] + 1; 2]);
        open.retain(|&i| i != tip);
        open.extend([l, r]);
        count += 1;
        tip = if rng.gen_bool(0.5) { l } else { r };
    }
    while count < spec.leaves {
        let growable: Vec<usize> = open
            .iter()
            .copied()
            .filter(|&i| depth[i] < spec.depth_max)
            .collect();
        let &slot = growable
            .choose(&mut rng)
            .ok_or_else(|| Error::Generation("no leaf slot left to split".into()))?;
        let (l, r) = (children.len(), children.len() + 1);
        children[slot] = Some((l, r));
        children.extend([None, None]);
        depth.extend([depth[slot] + 1; 2]);
        open.retain(|&i| i != slot);
        open.extend([l, r]);
        count += 1;
    }

    let shapes = children
        .iter()
        .map(|c| match c {
            Some((left, right)) => Shape::Split {
                feature: rng.gen_range(0..spec.n_features),
                left: *left,
                right: *right,
            },
            None => Shape::Leaf,
        })
        .collect();
    realize(&Skeleton { shapes }, spec.task, spec.n_features, spec.min_threshold_gap, &mut rng)
}

/// Complete tree where every root-to-leaf path uses exactly
/// `depth - duplicates_per_path` distinct features.
pub fn gen_complete(spec: &GenSpec) -> Result<VictimTree> {
    check_common(spec.n_features, spec.min_threshold_gap)?;
    if spec.depth == 0 || spec.depth > 24 {
        return Err(Error::Generation(format!("depth {} is outside 1..=24", spec.depth)));
    }
    if spec.duplicates_per_path >= spec.depth {
        return Err(Error::Generation(format!(
            "{} duplicates need more than {} nodes per path",
            spec.duplicates_per_path, spec.depth
        )));
    }
    let distinct = spec.depth - spec.duplicates_per_path;
    if distinct > spec.n_features {
        return Err(Error::Generation(format!(
            "{distinct} distinct features per path but only {} exist",
            spec.n_features
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut shapes = Vec::new();
    grow_complete(&mut shapes, &mut rng, spec.n_features, spec.depth, distinct, &mut Vec::new());
    realize(&Skeleton { shapes }, spec.task, spec.n_features, spec.min_threshold_gap, &mut rng)
}

/// Appends the subtree with `remaining` levels and returns its index.
/// `fresh` new features must still be introduced on every path through it.
fn grow_complete(
    shapes: &mut Vec<Shape>,
    rng: &mut ChaCha8Rng,
    n_features: usize,
    remaining: usize,
    fresh: usize,
    used: &mut Vec<usize>,
) -> usize {
    let at = shapes.len();
    if remaining == 0 {
        shapes.push(Shape::Leaf);
        return at;
    }
    shapes.push(Shape::Leaf);
    let reuse = !used.is_empty() && (fresh == 0 || rng.gen_range(0..remaining) >= fresh);
    let (feature, fresh_below) = if reuse {
        (*used.choose(rng).expect("non-empty"), fresh)
    } else {
        let unused: Vec<usize> = (0..n_features).filter(|f| !used.contains(f)).collect();
        (*unused.choose(rng).expect("enough features"), fresh - 1)
    };
    if !reuse {
        used.push(feature);
    }
    let left = grow_complete(shapes, rng, n_features, remaining - 1, fresh_below, used);
    let right = grow_complete(shapes, rng, n_features, remaining - 1, fresh_below, used);
    if !reuse {
        used.pop();
    }
    shapes[at] = Shape::Split { feature, left, right };
    at
}

/// Per path: number of nodes reusing a feature seen higher on the path.
pub fn duplicates_per_path(tree: &VictimTree) -> Vec<usize> {
    tree.paths()
        .iter()
        .map(|(nodes, _)| {
            let distinct: HashSet<usize> = nodes.iter().map(|n| n.0).collect();
            nodes.len() - distinct.len()
        })
        .collect()
}

/// Default feature box used by the generators.
pub fn default_features(n_features: usize) -> Vec<FeatureSpec> {
    uniform_features(n_features, DEFAULT_MIN, DEFAULT_MAX)
}
