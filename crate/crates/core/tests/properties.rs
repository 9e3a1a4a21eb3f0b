use std::collections::HashMap;

use barkbeetle::treegen::{gen_complete, gen_random, GenSpec};
use barkbeetle::{
    functionally_equivalent, tree_ext, Branch, ExtractionConfig, FaultSpec, LeafLabel, Oracle, Task,
    VictimOracle, VictimTree,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// Walks the serialized document directly, without the library's resolver.
struct DocWalker {
    nodes: HashMap<u64, (usize, f64, u64, u64)>,
    leaves: HashMap<u64, f64>,
    root: u64,
}

impl DocWalker {
    fn new(tree: &VictimTree) -> Self {
        let doc: Value = serde_json::from_str(&tree.to_json()).unwrap();
        let nodes = doc["nodes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|n| {
                let id = n["id"].as_u64().unwrap();
                let f = n["feature"].as_u64().unwrap() as usize;
                let t = n["threshold"].as_f64().unwrap();
                (id, (f, t, n["left"].as_u64().unwrap(), n["right"].as_u64().unwrap()))
            })
            .collect();
        let leaves = doc["leaves"]
            .as_array()
            .unwrap()
            .iter()
            .map(|l| (l["id"].as_u64().unwrap(), l["label"].as_f64().unwrap()))
            .collect();
        DocWalker {
            nodes,
            leaves,
            root: doc["root"].as_u64().unwrap(),
        }
    }

    fn descend(&self, id: u64, x: &[f64]) -> f64 {
        match self.nodes.get(&id) {
            Some(&(f, t, l, r)) => self.descend(if x[f] < t { l } else { r }, x),
            None => self.leaves[&id],
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.descend(self.root, x)
    }
}

fn value(label: LeafLabel) -> f64 {
    match label {
        LeafLabel::Value(v) => v,
        LeafLabel::Class(c) => c as f64,
    }
}

fn sample(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.gen_range(-1.0..11.0)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn infer_matches_document_walk(seed in any::<u64>()) {
        let tree = gen_random(20, 10, 4, Task::Regression, seed).unwrap();
        let walker = DocWalker::new(&tree);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        for _ in 0..1000 {
            let x = sample(&mut rng, 4);
            prop_assert_eq!(value(tree.infer(&x).unwrap()), walker.eval(&x));
        }
    }

    #[test]
    fn trace_agrees_with_infer(seed in any::<u64>()) {
        let tree = gen_random(20, 10, 4, Task::Classification, seed).unwrap();
        let by_id: HashMap<_, _> = tree.nodes().iter().map(|n| (n.id, *n)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..200 {
            let x = sample(&mut rng, 4);
            let path = tree.trace(&x).unwrap();
            prop_assert_eq!(path.label, tree.infer(&x).unwrap());
            prop_assert_eq!(path.directions.len(), path.node_ids.len());
            for (id, dir) in path.node_ids.iter().zip(&path.directions) {
                let n = by_id[id];
                prop_assert_eq!(*dir, Branch::of(x[n.feature], n.threshold));
            }
        }
    }

    #[test]
    fn natural_faults_change_nothing(seed in any::<u64>()) {
        let tree = gen_random(12, 6, 3, Task::Regression, seed).unwrap();
        let mut oracle = VictimOracle::deterministic(&tree);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sample(&mut rng, 3);
        let path = tree.trace(&x).unwrap();
        let label = oracle.infer(&x).unwrap();
        for (i, &dir) in path.directions.iter().enumerate() {
            let fault = FaultSpec::new(i, dir);
            prop_assert_eq!(oracle.f_inf(&x, fault).unwrap(), label);
            prop_assert_eq!(oracle.probe_faulted_path(&x, fault).unwrap(), path.len());
        }
        prop_assert!(oracle.f_inf(&x, FaultSpec::new(path.len(), Branch::Left)).is_err());
    }

    #[test]
    fn small_trees_extract_exactly(leaves in 2usize..14, d in 1usize..5, seed in any::<u64>()) {
        let tree = gen_random(leaves, leaves - 1, d, Task::Regression, seed).unwrap();
        let mut oracle = VictimOracle::deterministic(&tree);
        let out = tree_ext(&mut oracle, &ExtractionConfig::for_tree(&tree, 1e-3)).unwrap();
        prop_assert_eq!(out.paths.len(), leaves);
        let gap = tree.aligned_threshold_gap(&out.tree);
        prop_assert!(gap.is_some_and(|g| g <= 1e-3), "gap {:?}", gap);
        let report = functionally_equivalent(&tree, &out.tree, 500, seed).unwrap();
        prop_assert_eq!(report.mismatches, 0);
    }
}

#[test]
fn documents_round_trip() {
    for seed in 0..500u64 {
        let tree = if seed % 2 == 0 {
            let task = if seed % 4 == 0 { Task::Regression } else { Task::Classification };
            gen_random(2 + (seed as usize % 30), 12, 1 + seed as usize % 6, task, seed).unwrap()
        } else {
            let depth = 1 + seed as usize % 6;
            gen_complete(&GenSpec::new(depth, 6, seed as usize % depth, seed)).unwrap()
        };
        let text = tree.to_json();
        let back = VictimTree::from_json(&text).unwrap();
        assert_eq!(back, tree);
        assert_eq!(back.to_json(), text);
    }
}
