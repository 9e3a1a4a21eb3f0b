use crate::error::{Error, Result};
use crate::tree::{Branch, LeafLabel, NodeId, Task, TreeBuilder, VictimTree};

use super::{ExtractionConfig, RecoveredPath};

enum Trie {
    Empty,
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Trie>,
        right: Box<Trie>,
    },
    Leaf(LeafLabel),
}

/// Merges recovered paths into a tree. Paths sharing a prefix must agree
/// on every shared node (same feature, thresholds within ε/2).
pub fn assemble(paths: &[RecoveredPath], config: &ExtractionConfig) -> Result<VictimTree> {
    let tolerance = config.epsilon / 2.0;
    let mut root = Trie::Empty;
    for (n, path) in paths.iter().enumerate() {
        let triples = path
            .triples()
            .ok_or_else(|| Error::Assembly(format!("path {n} is not fully recovered")))?;
        let mut slot = &mut root;
        for (pos, (f, t, br)) in triples.into_iter().enumerate() {
            let spec = config
                .feature_specs
                .get(f)
                .ok_or_else(|| Error::Assembly(format!("path {n} uses unknown feature {f}")))?;
            let t = t.clamp(spec.min, spec.max);
            if let Trie::Empty = slot {
                *slot = Trie::Split {
                    feature: f,
                    threshold: t,
                    left: Box::new(Trie::Empty),
                    right: Box::new(Trie::Empty),
                };
            }
            slot = match slot {
                Trie::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature != f || (*threshold - t).abs() > tolerance {
                        return Err(Error::Assembly(format!(
                            "path {n} has x{f} < {t} at depth {pos} where another path has x{feature} < {threshold}"
                        )));
                    }
                    match br {
                        Branch::Left => left,
                        Branch::Right => right,
                    }
                }
                Trie::Leaf(_) => {
                    return Err(Error::Assembly(format!(
                        "path {n} continues below a leaf at depth {pos}"
                    )))
                }
                Trie::Empty => unreachable!("filled above"),
            };
        }
        match slot {
            Trie::Empty => *slot = Trie::Leaf(path.label),
            _ => {
                return Err(Error::Assembly(format!(
                    "path {n} ends where another path continues"
                )))
            }
        }
    }

    let task = if paths.iter().all(|p| matches!(p.label, LeafLabel::Class(_))) && !paths.is_empty() {
        Task::Classification
    } else if paths.iter().all(|p| matches!(p.label, LeafLabel::Value(_))) {
        Task::Regression
    } else {
        return Err(Error::Assembly("paths mix class and value labels".into()));
    };
    let mut builder = TreeBuilder::new(task, config.feature_specs.clone());
    let root_id = emit(&root, &mut builder)?;
    builder.build(root_id)
}

fn emit(trie: &Trie, b: &mut TreeBuilder) -> Result<NodeId> {
    match trie {
        Trie::Empty => Err(Error::Assembly("a split is missing one of its subtrees".into())),
        Trie::Leaf(label) => Ok(b.leaf(*label)),
        Trie::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let l = emit(left, b)?;
            let r = emit(right, b)?;
            Ok(b.split(*feature, *threshold, l, r))
        }
    }
}
