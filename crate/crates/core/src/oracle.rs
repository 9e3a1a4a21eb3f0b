//! Attacker-facing black box around a victim tree.
//!
//! The oracle answers three kinds of requests: normal inference, inference
//! with one comparison forced by a fault, and a side-channel probe that
//! reveals how many internal nodes a traversal visited. Nothing else about
//! the tree is exposed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::{Branch, LeafLabel, VictimTree};

/// Forces the comparison at traversal position `node_index` (0 = root) to
/// go `force`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaultSpec {
    pub node_index: usize,
    pub force: Branch,
}

impl FaultSpec {
    pub fn new(node_index: usize, force: Branch) -> Self {
        FaultSpec { node_index, force }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GlitchMode {
    Deterministic,
    Probabilistic,
}

/// Reliability of the physical glitch. Each attempt lands with
/// `success_prob`; failed attempts are retried up to `max_attempts`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlitchModel {
    pub mode: GlitchMode,
    #[serde(default = "one")]
    pub success_prob: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: u32,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

fn default_attempts() -> u32 {
    64
}

impl Default for GlitchModel {
    fn default() -> Self {
        GlitchModel::deterministic()
    }
}

impl GlitchModel {
    pub fn deterministic() -> Self {
        GlitchModel {
            mode: GlitchMode::Deterministic,
            success_prob: 1.0,
            max_attempts: default_attempts(),
            seed: 0,
        }
    }

    pub fn probabilistic(success_prob: f64, max_attempts: u32, seed: u64) -> Self {
        GlitchModel {
            mode: GlitchMode::Probabilistic,
            success_prob,
            max_attempts,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == GlitchMode::Probabilistic
            && !(self.success_prob > 0.0 && self.success_prob <= 1.0)
        {
            return Err(Error::validation("success_prob", "must lie in (0, 1]"));
        }
        if self.max_attempts == 0 {
            return Err(Error::validation("max_attempts", "must be at least 1"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: GlitchModel =
            serde_json::from_str(text).map_err(|e| Error::parse("glitch", e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub normal_queries: u64,
    /// Successfully faulted inferences.
    pub fault_runs: u64,
    /// Every glitch trial, failed ones included.
    pub glitch_attempts: u64,
    pub side_channel_probes: u64,
}

impl QueryLedger {
    /// Inferences the attacker asked for: normal queries plus fault runs.
    pub fn total_queries(&self) -> u64 {
        self.normal_queries + self.fault_runs
    }

    /// Counts accumulated after `earlier` was taken.
    pub fn since(&self, earlier: &QueryLedger) -> QueryLedger {
        QueryLedger {
            normal_queries: self.normal_queries - earlier.normal_queries,
            fault_runs: self.fault_runs - earlier.fault_runs,
            glitch_attempts: self.glitch_attempts - earlier.glitch_attempts,
            side_channel_probes: self.side_channel_probes - earlier.side_channel_probes,
        }
    }
}

/// The interface extraction code is written against.
pub trait Oracle {
    fn infer(&mut self, x: &[f64]) -> Result<LeafLabel>;

    fn f_inf(&mut self, x: &[f64], fault: FaultSpec) -> Result<LeafLabel>;

    /// Side channel: node count β of the traversal of `x`.
    fn probe_path(&mut self, x: &[f64]) -> Result<usize>;

    /// Side channel observed during a faulted run.
    fn probe_faulted_path(&mut self, x: &[f64], fault: FaultSpec) -> Result<usize>;

    fn ledger_snapshot(&self) -> QueryLedger;
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn infer(&mut self, x: &[f64]) -> Result<LeafLabel> {
        (**self).infer(x)
    }
    fn f_inf(&mut self, x: &[f64], fault: FaultSpec) -> Result<LeafLabel> {
        (**self).f_inf(x, fault)
    }
    fn probe_path(&mut self, x: &[f64]) -> Result<usize> {
        (**self).probe_path(x)
    }
    fn probe_faulted_path(&mut self, x: &[f64], fault: FaultSpec) -> Result<usize> {
        (**self).probe_faulted_path(x, fault)
    }
    fn ledger_snapshot(&self) -> QueryLedger {
        (**self).ledger_snapshot()
    }
}

/// Simulated device running a victim tree.
pub struct VictimOracle<'t> {
    tree: &'t VictimTree,
    glitch: GlitchModel,
    rng: ChaCha8Rng,
    ledger: QueryLedger,
}

impl<'t> VictimOracle<'t> {
    pub fn new(tree: &'t VictimTree, glitch: GlitchModel) -> Result<Self> {
        glitch.validate()?;
        Ok(VictimOracle {
            tree,
            rng: ChaCha8Rng::seed_from_u64(glitch.seed),
            glitch,
            ledger: QueryLedger::default(),
        })
    }

    pub fn deterministic(tree: &'t VictimTree) -> Self {
        Self::new(tree, GlitchModel::deterministic()).expect("default model is valid")
    }

    pub fn glitch_model(&self) -> &GlitchModel {
        &self.glitch
    }

    fn faulted(&self, x: &[f64], fault: FaultSpec) -> Result<LeafLabel> {
        Ok(self
            .tree
            .walk(x, Some((fault.node_index, fault.force)))?
            .label)
    }
}

impl Oracle for VictimOracle<'_> {
    fn infer(&mut self, x: &[f64]) -> Result<LeafLabel> {
        let label = self.tree.infer(x)?;
        self.ledger.normal_queries += 1;
        Ok(label)
    }

    fn f_inf(&mut self, x: &[f64], fault: FaultSpec) -> Result<LeafLabel> {
        // validates dimensions and the target position before any glitching
        let label = self.faulted(x, fault)?;
        match self.glitch.mode {
            GlitchMode::Deterministic => {
                self.ledger.glitch_attempts += 1;
                self.ledger.fault_runs += 1;
                Ok(label)
            }
            GlitchMode::Probabilistic => {
                for _ in 0..self.glitch.max_attempts {
                    self.ledger.glitch_attempts += 1;
                    if self.rng.gen_bool(self.glitch.success_prob) {
                        self.ledger.fault_runs += 1;
                        return Ok(label);
                    }
                    // the attempt ran un-faulted; its output is discarded
                }
                Err(Error::GlitchExhausted {
                    attempts: self.glitch.max_attempts as u64,
                })
            }
        }
    }

    fn probe_path(&mut self, x: &[f64]) -> Result<usize> {
        let beta = self.tree.trace(x)?.len();
        self.ledger.side_channel_probes += 1;
        Ok(beta)
    }

    fn probe_faulted_path(&mut self, x: &[f64], fault: FaultSpec) -> Result<usize> {
        let beta = self
            .tree
            .walk(x, Some((fault.node_index, fault.force)))?
            .len();
        self.ledger.side_channel_probes += 1;
        Ok(beta)
    }

    fn ledger_snapshot(&self) -> QueryLedger {
        self.ledger
    }
}
