use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::tree::Branch;

use super::path::{dfd, ffd};
use super::{assemble, observe, Budgeted, Extraction, ExtractionConfig, LeafKey, RecoveredPath};

/// Bookkeeping shared by the recover-tree rounds.
#[derive(Debug, Clone, Default)]
pub struct ExtractionState {
    pub paths: Vec<RecoveredPath>,
    /// Witness input reaching each path's leaf.
    pub baseline_inputs: Vec<Vec<f64>>,
    /// Root subtree each path lies in.
    pub lr_path: Vec<Branch>,
    /// `true` while the path still has sibling subtrees to visit.
    pub paths_status: Vec<bool>,
    /// First position from which siblings are visited.
    pub start_node: Vec<usize>,
    /// Paths scheduled for the next round.
    pub candidates: Vec<bool>,
    index: HashMap<LeafKey, usize>,
}

impl ExtractionState {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn pending(&self) -> usize {
        self.paths_status.iter().filter(|&&s| s).count()
    }

    pub fn find(&self, key: &LeafKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    fn register(
        &mut self,
        path: RecoveredPath,
        witness: Vec<f64>,
        side: Branch,
        start: usize,
    ) -> Result<usize> {
        let key = path.key();
        if let Some(other) = self.find(&key) {
            return Err(Error::Identifiability(format!(
                "two leaves answer {key}; the second was reached from path {other}'s sibling search"
            )));
        }
        let pending = start < path.beta();
        let id = self.paths.len();
        self.index.insert(key, id);
        self.paths.push(path);
        self.baseline_inputs.push(witness);
        self.lr_path.push(side);
        self.paths_status.push(pending);
        self.start_node.push(start);
        self.candidates.push(pending);
        Ok(id)
    }
}

fn recover_suffix<O: Oracle>(
    oracle: &mut O,
    config: &ExtractionConfig,
    path: &mut RecoveredPath,
    x: &[f64],
    start: usize,
) -> Result<()> {
    let chains = ffd(oracle, config, path, x, start)?;
    dfd(oracle, config, path, x, start, chains)?;
    path.complete = true;
    Ok(())
}

/// One recover-tree round: every candidate path crosses each of its nodes
/// from `start_node` down and recovers the sibling path it lands on.
/// Returns the number of paths registered.
pub fn rti<O: Oracle>(
    oracle: &mut O,
    config: &ExtractionConfig,
    state: &mut ExtractionState,
) -> Result<usize> {
    let before = state.len();
    let round: Vec<usize> = (0..state.len()).filter(|&k| state.candidates[k]).collect();
    for k in round {
        for i in state.start_node[k]..state.paths[k].beta() {
            let (f, t, br) = state.paths[k].nodes[i]
                .known()
                .ok_or_else(|| Error::Stalled(format!("path {k} has no node at {i}")))?;
            let mut x = state.baseline_inputs[k].clone();
            x[f] = match br {
                Branch::Left => t + config.nudge(f),
                Branch::Right => t - config.nudge(f),
            };
            let key = observe(oracle, &x, None)?;
            if key.depth <= i {
                return Err(Error::Inconsistent(format!(
                    "crossing node {i} of path {k} reached {key}, shorter than the shared prefix"
                )));
            }
            let mut path = RecoveredPath::unknown(key);
            path.nodes[..=i].copy_from_slice(&state.paths[k].nodes[..=i]);
            path.nodes[i].br = Some(br.flip());
            if key.depth == i + 1 {
                path.complete = true;
            } else {
                recover_suffix(oracle, config, &mut path, &x, i + 1)?;
            }
            let side = state.lr_path[k];
            state.register(path, x, side, i + 1)?;
        }
        state.candidates[k] = false;
        state.paths_status[k] = false;
    }
    Ok(state.len() - before)
}

/// Extracts the whole tree behind `oracle`.
pub fn tree_ext<O: Oracle>(oracle: O, config: &ExtractionConfig) -> Result<Extraction> {
    config.validate()?;
    let mut oracle = Budgeted::new(oracle, config.max_queries);
    let specs = &config.feature_specs;
    let low: Vec<f64> = specs.iter().map(|f| f.min - 1.0).collect();
    let high: Vec<f64> = specs.iter().map(|f| f.max + 1.0).collect();
    let low_key = observe(&mut oracle, &low, None)?;
    let high_key = observe(&mut oracle, &high, None)?;

    let mut state = ExtractionState::default();
    if low_key == high_key {
        if low_key.depth != 0 {
            return Err(Error::Identifiability(format!(
                "both corners of the feature box answer {low_key}"
            )));
        }
        let mut leaf = RecoveredPath::unknown(low_key);
        leaf.complete = true;
        state.register(leaf, low, Branch::Left, 0)?;
    } else {
        for (x, key, side) in [(low, low_key, Branch::Left), (high, high_key, Branch::Right)] {
            let mut path = RecoveredPath::unknown(key);
            recover_suffix(&mut oracle, config, &mut path, &x, 0)?;
            // the root is crossed by the opposite corner's path
            state.register(path, x, side, 1)?;
        }
    }

    let mut rounds = 0;
    while state.pending() > 0 {
        let limit = config.max_rounds.unwrap_or(4 * state.len());
        if rounds >= limit {
            return Err(Error::Stalled(format!(
                "{rounds} rounds used, {} of {} paths still pending",
                state.pending(),
                state.len()
            )));
        }
        rounds += 1;
        rti(&mut oracle, config, &mut state)?;
    }

    let tree = assemble(&state.paths, config)?;
    Ok(Extraction {
        tree,
        ledger: oracle.spent(),
        paths: state.paths,
        rounds,
    })
}
