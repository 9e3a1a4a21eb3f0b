//! Fault-assisted tree extraction.
//!
//! [`tree_ext`] recovers a victim tree path by path. The two outermost
//! paths are recovered first; afterwards every recovered node is crossed
//! once to reach its unexplored sibling subtree, whose suffix is then
//! recovered with first-feature discovery and duplicate-feature discovery.

mod assemble;
mod iterate;
mod path;
pub mod search;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{FaultSpec, Oracle, QueryLedger};
use crate::tree::{Branch, FeatureSpec, LeafLabel, VictimTree};

pub use assemble::assemble;
pub use iterate::{rti, tree_ext, ExtractionState};
pub use path::{dfd, ffd, Chain};
pub use search::{fabs, SearchOutcome, SearchRequest};

/// What the attacker can tell leaves apart by: the label plus the path
/// length leaked by the side channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LeafKey {
    pub label: LeafLabel,
    pub depth: usize,
}

impl std::fmt::Display for LeafKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (β={})", self.label, self.depth)
    }
}

/// One inference plus its side-channel reading.
///
/// A fault aimed past the end of the traversal never lands, so the run is
/// repeated as a normal inference.
pub fn observe<O: Oracle>(oracle: &mut O, x: &[f64], fault: Option<FaultSpec>) -> Result<LeafKey> {
    if let Some(f) = fault {
        match oracle.f_inf(x, f) {
            Ok(label) => {
                let depth = oracle.probe_faulted_path(x, f)?;
                return Ok(LeafKey { label, depth });
            }
            Err(Error::FaultOutOfRange { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    let label = oracle.infer(x)?;
    let depth = oracle.probe_path(x)?;
    Ok(LeafKey { label, depth })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractionConfig {
    /// Accuracy target for recovered thresholds and the crossing nudge.
    pub epsilon: f64,
    /// Bracket width at which a threshold search stops.
    pub precision: f64,
    pub feature_specs: Vec<FeatureSpec>,
    /// Cap on recover-tree rounds; `None` means four times the number of
    /// paths known so far.
    #[serde(default)]
    pub max_rounds: Option<usize>,
    /// Cap on normal queries plus fault runs.
    #[serde(default)]
    pub max_queries: Option<u64>,
    /// Features whose values are integers; these use a nudge of at least 1.
    #[serde(default)]
    pub integer_features: Vec<usize>,
}

/// Default ratio between `epsilon` and the search stopping width.
pub const PRECISION_DIVISOR: f64 = (1u64 << 20) as f64;

impl ExtractionConfig {
    pub fn new(feature_specs: Vec<FeatureSpec>, epsilon: f64) -> Self {
        ExtractionConfig {
            epsilon,
            precision: epsilon / PRECISION_DIVISOR,
            feature_specs,
            max_rounds: None,
            max_queries: None,
            integer_features: Vec::new(),
        }
    }

    pub fn for_tree(tree: &VictimTree, epsilon: f64) -> Self {
        Self::new(tree.features().to_vec(), epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_specs.is_empty() {
            return Err(Error::validation("feature_specs", "at least one feature is required"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::validation("epsilon", "must be positive and finite"));
        }
        if !(self.precision > 0.0 && self.precision <= self.epsilon) {
            return Err(Error::validation("precision", "must lie in (0, epsilon]"));
        }
        for (i, f) in self.feature_specs.iter().enumerate() {
            if f.index != i || !(f.min < f.max) {
                return Err(Error::validation(
                    "feature_specs",
                    format!("feature {i} has index {} and range [{}, {}]", f.index, f.min, f.max),
                ));
            }
            if self.epsilon >= f.width() {
                return Err(Error::validation(
                    "epsilon",
                    format!("{} is not below the width of feature {i}", self.epsilon),
                ));
            }
        }
        if let Some(&k) = self.integer_features.iter().find(|&&k| k >= self.feature_specs.len()) {
            return Err(Error::validation("integer_features", format!("no feature {k}")));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.feature_specs.len()
    }

    pub fn nudge(&self, feature: usize) -> f64 {
        if self.integer_features.contains(&feature) {
            self.epsilon.max(1.0)
        } else {
            self.epsilon
        }
    }
}

/// A recovered split as seen from one path.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecoveredNode {
    pub feature: Option<usize>,
    pub threshold: Option<f64>,
    /// Direction the owning path takes here.
    pub br: Option<Branch>,
}

impl RecoveredNode {
    pub fn is_known(&self) -> bool {
        self.feature.is_some() && self.threshold.is_some() && self.br.is_some()
    }

    /// Write-once assignment.
    pub(crate) fn set(&mut self, feature: usize, threshold: f64, br: Branch) -> Result<()> {
        if self.is_known() {
            return Err(Error::Inconsistent(format!(
                "node already holds x{} < {}",
                self.feature.unwrap_or_default(),
                self.threshold.unwrap_or_default()
            )));
        }
        *self = RecoveredNode {
            feature: Some(feature),
            threshold: Some(threshold),
            br: Some(br),
        };
        Ok(())
    }

    pub(crate) fn known(&self) -> Option<(usize, f64, Branch)> {
        Some((self.feature?, self.threshold?, self.br?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveredPath {
    pub nodes: Vec<RecoveredNode>,
    pub label: LeafLabel,
    pub complete: bool,
}

impl RecoveredPath {
    pub(crate) fn unknown(key: LeafKey) -> Self {
        RecoveredPath {
            nodes: vec![RecoveredNode::default(); key.depth],
            label: key.label,
            complete: false,
        }
    }

    pub fn beta(&self) -> usize {
        self.nodes.len()
    }

    pub fn key(&self) -> LeafKey {
        LeafKey {
            label: self.label,
            depth: self.nodes.len(),
        }
    }

    /// Every node as `(feature, threshold, direction)`, if all are known.
    pub fn triples(&self) -> Option<Vec<(usize, f64, Branch)>> {
        self.nodes.iter().map(RecoveredNode::known).collect()
    }
}

/// Result of a successful extraction.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub tree: VictimTree,
    pub paths: Vec<RecoveredPath>,
    /// Queries spent by this run only.
    pub ledger: QueryLedger,
    pub rounds: usize,
}

/// Oracle wrapper enforcing `ExtractionConfig::max_queries`.
pub(crate) struct Budgeted<O> {
    inner: O,
    start: QueryLedger,
    budget: Option<u64>,
}

impl<O: Oracle> Budgeted<O> {
    pub(crate) fn new(inner: O, budget: Option<u64>) -> Self {
        let start = inner.ledger_snapshot();
        Budgeted { inner, start, budget }
    }

    pub(crate) fn spent(&self) -> QueryLedger {
        self.inner.ledger_snapshot().since(&self.start)
    }

    fn check(&self) -> Result<()> {
        match self.budget {
            Some(budget) if self.spent().total_queries() >= budget => {
                Err(Error::BudgetExceeded { budget })
            }
            _ => Ok(()),
        }
    }
}

impl<O: Oracle> Oracle for Budgeted<O> {
    fn infer(&mut self, x: &[f64]) -> Result<LeafLabel> {
        self.check()?;
        self.inner.infer(x)
    }
    fn f_inf(&mut self, x: &[f64], fault: FaultSpec) -> Result<LeafLabel> {
        self.check()?;
        self.inner.f_inf(x, fault)
    }
    fn probe_path(&mut self, x: &[f64]) -> Result<usize> {
        self.inner.probe_path(x)
    }
    fn probe_faulted_path(&mut self, x: &[f64], fault: FaultSpec) -> Result<usize> {
        self.inner.probe_faulted_path(x, fault)
    }
    fn ledger_snapshot(&self) -> QueryLedger {
        self.inner.ledger_snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::uniform_features;

    #[test]
    fn config_validation() {
        let c = ExtractionConfig::new(uniform_features(2, 0.0, 10.0), 1e-3);
        c.validate().unwrap();
        assert_eq!(c.nudge(0), 1e-3);

        let mut bad = c.clone();
        bad.epsilon = 20.0;
        assert!(bad.validate().is_err());

        let mut bad = c.clone();
        bad.precision = 1.0;
        assert!(bad.validate().is_err());

        let mut int = c.clone();
        int.integer_features = vec![1];
        assert_eq!(int.nudge(1), 1.0);
        int.integer_features = vec![2];
        assert!(int.validate().is_err());
    }

    #[test]
    fn nodes_are_write_once() {
        let mut n = RecoveredNode::default();
        n.set(1, 2.0, Branch::Left).unwrap();
        assert!(n.set(1, 2.0, Branch::Left).is_err());
        assert_eq!(n.known(), Some((1, 2.0, Branch::Left)));
    }
}
