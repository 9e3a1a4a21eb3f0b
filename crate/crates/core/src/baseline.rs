//! Top-down, fault-free extraction.
//!
//! Each leaf is described by the box of inputs that reach it. Starting from
//! one input, every box side is found with a binary search along a single
//! axis, and inputs just across each side seed the search for neighbouring
//! leaves. Only normal inference is used; internal nodes whose constraint is
//! implied by a tighter one on the same path stay invisible.

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::search::{fabs, SearchRequest};
use crate::extract::{observe, Budgeted, ExtractionConfig, LeafKey};
use crate::oracle::{Oracle, QueryLedger};
use crate::tree::{Branch, LeafLabel};

/// `[lo, hi)` along one feature; `None` means unbounded on that side.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Interval {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Interval {
    pub fn contains(&self, v: f64) -> bool {
        self.lo.is_none_or(|lo| v >= lo) && self.hi.is_none_or(|hi| v < hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafConstraintBox {
    pub intervals: Vec<Interval>,
    pub label: LeafLabel,
    /// Path length reported by the side channel.
    pub depth: usize,
}

impl LeafConstraintBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        self.intervals.iter().zip(x).all(|(iv, &v)| iv.contains(v))
    }

    /// Number of finite box sides.
    pub fn constraints(&self) -> usize {
        self.intervals
            .iter()
            .map(|iv| iv.lo.is_some() as usize + iv.hi.is_some() as usize)
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct BaselineExtraction {
    pub boxes: Vec<LeafConstraintBox>,
    pub ledger: QueryLedger,
}

impl BaselineExtraction {
    pub fn predict(&self, x: &[f64]) -> Option<LeafLabel> {
        self.boxes.iter().find(|b| b.contains(x)).map(|b| b.label)
    }

    pub fn total_constraints(&self) -> usize {
        self.boxes.iter().map(LeafConstraintBox::constraints).sum()
    }
}

/// Explores leaves breadth-first from a random starting input.
pub fn baseline_extract<O: Oracle>(
    oracle: O,
    config: &ExtractionConfig,
    seed: u64,
) -> Result<BaselineExtraction> {
    config.validate()?;
    let mut oracle = Budgeted::new(oracle, config.max_queries);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start: Vec<f64> = config
        .feature_specs
        .iter()
        .map(|f| rng.gen_range(f.min..f.max))
        .collect();
    let key = observe(&mut oracle, &start, None)?;

    let mut frontier = VecDeque::from([(start, key)]);
    let mut seen: HashSet<LeafKey> = HashSet::new();
    let mut boxes = Vec::new();
    while let Some((x, key)) = frontier.pop_front() {
        if !seen.insert(key) {
            continue;
        }
        let mut intervals = vec![Interval::default(); config.n_features()];
        for (k, spec) in config.feature_specs.iter().enumerate() {
            for flag in [Branch::Left, Branch::Right] {
                let end = match flag {
                    Branch::Left => spec.max + 1.0,
                    Branch::Right => spec.min - 1.0,
                };
                let mut probe = x.clone();
                probe[k] = end;
                let across = observe(&mut oracle, &probe, None)?;
                if across == key {
                    continue;
                }
                let (low, high) = match flag {
                    Branch::Left => (x[k], end),
                    Branch::Right => (end, x[k]),
                };
                let found = fabs(
                    &mut oracle,
                    &SearchRequest {
                        x: &x,
                        feature: k,
                        low,
                        high,
                        baseline: key,
                        fault_node: None,
                        flag,
                        epsilon: config.precision,
                        far_end: Some(across),
                    },
                )?;
                let bound = found.threshold().clamp(spec.min, spec.max);
                match flag {
                    Branch::Left => intervals[k].hi = Some(bound),
                    Branch::Right => intervals[k].lo = Some(bound),
                }
                if !seen.contains(&found.outside_key) {
                    probe[k] = found.outside;
                    frontier.push_back((probe, found.outside_key));
                }
            }
        }
        boxes.push(LeafConstraintBox {
            intervals,
            label: key.label,
            depth: key.depth,
        });
    }
    let ledger = oracle.spent();
    if ledger.fault_runs != 0 {
        return Err(Error::Inconsistent("fault-free extraction used faults".into()));
    }
    Ok(BaselineExtraction { boxes, ledger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::VictimOracle;
    use crate::tree::{uniform_features, Task, TreeBuilder, VictimTree};

    #[test]
    fn single_split_gives_two_boxes() {
        let mut b = TreeBuilder::new(Task::Regression, uniform_features(2, 0.0, 10.0));
        let l = b.value(1.0);
        let r = b.value(2.0);
        let root = b.split(0, 6.5, l, r);
        let t = b.build(root).unwrap();
        let mut o = VictimOracle::deterministic(&t);
        let out = baseline_extract(&mut o, &ExtractionConfig::for_tree(&t, 1e-3), 3).unwrap();
        assert_eq!(out.boxes.len(), 2);
        for bx in &out.boxes {
            assert_eq!(bx.constraints(), 1);
            let side = bx.intervals[0].hi.or(bx.intervals[0].lo).unwrap();
            assert!((side - 6.5).abs() <= 1e-3);
        }
        assert_eq!(out.ledger.fault_runs, 0);
    }

    /// x<8 ? (x<5 ? (x>=2 ? A : B) : C) : D along one feature.
    fn nested() -> VictimTree {
        let mut b = TreeBuilder::new(Task::Regression, uniform_features(1, 0.0, 10.0));
        let a = b.value(1.0);
        let bb = b.value(2.0);
        let c = b.value(3.0);
        let d = b.value(4.0);
        let n2 = b.split(0, 2.0, bb, a);
        let n5 = b.split(0, 5.0, n2, c);
        let root = b.split(0, 8.0, n5, d);
        b.build(root).unwrap()
    }

    #[test]
    fn implied_node_is_invisible() {
        let t = nested();
        let mut o = VictimOracle::deterministic(&t);
        let out = baseline_extract(&mut o, &ExtractionConfig::for_tree(&t, 1e-3), 0).unwrap();
        let a = out.boxes.iter().find(|b| b.label == LeafLabel::Value(1.0)).unwrap();
        // the path to A has three nodes; its box only records 2 <= x < 5
        assert_eq!(a.constraints(), 2);
        let iv = a.intervals[0];
        assert!((iv.lo.unwrap() - 2.0).abs() <= 1e-3);
        assert!((iv.hi.unwrap() - 5.0).abs() <= 1e-3);
    }

    #[test]
    fn boxes_reproduce_the_victim() {
        let t = crate::treegen::gen_random(30, 8, 3, Task::Regression, 9).unwrap();
        let mut o = VictimOracle::deterministic(&t);
        let out = baseline_extract(&mut o, &ExtractionConfig::for_tree(&t, 1e-3), 1).unwrap();
        assert_eq!(out.boxes.len(), 30);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..10.0)).collect();
            assert_eq!(out.predict(&x), Some(t.infer(&x).unwrap()));
        }
    }
}
