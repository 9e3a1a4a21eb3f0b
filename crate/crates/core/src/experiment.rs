//! Single runs and parameter sweeps with machine-readable reports.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{baseline_extract, LeafConstraintBox};
use crate::equivalence::functionally_equivalent;
use crate::error::{Error, Result};
use crate::extract::{tree_ext, ExtractionConfig};
use crate::oracle::{GlitchModel, QueryLedger, VictimOracle};
use crate::tree::VictimTree;
use crate::treegen::{gen_complete, GenSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Attack {
    Barkbeetle,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub leaves: usize,
    pub depth: usize,
    pub features: usize,
}

impl From<&VictimTree> for TreeStats {
    fn from(t: &VictimTree) -> Self {
        TreeStats {
            leaves: t.leaf_count(),
            depth: t.depth(),
            features: t.n_features(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceSummary {
    pub samples: u64,
    pub mismatches: u64,
    pub max_threshold_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub attack: Attack,
    pub epsilon: f64,
    pub glitch: GlitchModel,
    /// Seeds the baseline's starting input and the equivalence samples.
    pub seed: u64,
    pub samples: u64,
    #[serde(default)]
    pub max_queries: Option<u64>,
}

impl RunOptions {
    pub fn new(attack: Attack, epsilon: f64) -> Self {
        RunOptions {
            attack,
            epsilon,
            glitch: GlitchModel::deterministic(),
            seed: 0,
            samples: 10_000,
            max_queries: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub attack: Attack,
    pub total_queries: u64,
    pub normal_queries: u64,
    pub fault_runs: u64,
    pub glitch_attempts: u64,
    pub side_channel_probes: u64,
    /// Recovered paths (BarkBeetle) or boxes (baseline).
    pub paths: usize,
    pub wall_time: f64,
    pub tree_stats: TreeStats,
    pub equivalence: Option<EquivalenceSummary>,
    pub config: RunOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<LeafConstraintBox>>,
}

impl RunReport {
    pub fn ledger(&self) -> QueryLedger {
        QueryLedger {
            normal_queries: self.normal_queries,
            fault_runs: self.fault_runs,
            glitch_attempts: self.glitch_attempts,
            side_channel_probes: self.side_channel_probes,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// JSON with the timing field zeroed, for byte comparisons.
    pub fn to_json_untimed(&self) -> String {
        RunReport {
            wall_time: 0.0,
            ..self.clone()
        }
        .to_json()
    }
}

/// Runs one attack against a fresh oracle over `truth`. Returns the
/// report and, for BarkBeetle, the recovered tree.
pub fn run_attack(truth: &VictimTree, opts: &RunOptions) -> Result<(RunReport, Option<VictimTree>)> {
    let mut config = ExtractionConfig::for_tree(truth, opts.epsilon);
    config.max_queries = opts.max_queries;
    let mut oracle = VictimOracle::new(truth, opts.glitch)?;
    let clock = Instant::now();
    let (ledger, paths, recovered, boxes) = match opts.attack {
        Attack::Barkbeetle => {
            let out = tree_ext(&mut oracle, &config)?;
            (out.ledger, out.paths.len(), Some(out.tree), None)
        }
        Attack::Baseline => {
            let out = baseline_extract(&mut oracle, &config, opts.seed)?;
            (out.ledger, out.boxes.len(), None, Some(out))
        }
    };
    let wall_time = clock.elapsed().as_secs_f64();

    let equivalence = match (&recovered, &boxes) {
        (Some(tree), _) => {
            let r = functionally_equivalent(truth, tree, opts.samples, opts.seed)?;
            EquivalenceSummary {
                samples: r.samples,
                mismatches: r.mismatches,
                max_threshold_gap: r.max_threshold_gap,
            }
        }
        (None, Some(b)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let mut x = vec![0.0; truth.n_features()];
            let mut mismatches = 0;
            for _ in 0..opts.samples {
                for (xi, f) in x.iter_mut().zip(truth.features()) {
                    *xi = rng.gen_range(f.min..f.max);
                }
                if b.predict(&x) != Some(truth.infer(&x)?) {
                    mismatches += 1;
                }
            }
            EquivalenceSummary {
                samples: opts.samples,
                mismatches,
                max_threshold_gap: None,
            }
        }
        (None, None) => unreachable!("every attack yields a tree or boxes"),
    };

    let report = RunReport {
        attack: opts.attack,
        total_queries: ledger.total_queries(),
        normal_queries: ledger.normal_queries,
        fault_runs: ledger.fault_runs,
        glitch_attempts: ledger.glitch_attempts,
        side_channel_probes: ledger.side_channel_probes,
        paths,
        wall_time,
        tree_stats: TreeStats::from(truth),
        equivalence: Some(equivalence),
        config: opts.clone(),
        boxes: boxes.map(|b| b.boxes),
    };
    Ok((report, recovered))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    /// Vary the depth of complete trees.
    Depth,
    /// Vary duplicates per path at a fixed depth.
    Dup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub mode: SweepMode,
    pub values: Vec<usize>,
    /// Tree depth in dup mode.
    pub depth: usize,
    pub features: usize,
    /// Duplicates per path in depth mode.
    pub dups: usize,
    pub epsilon: f64,
    /// Every row generates its tree from this seed.
    pub seed: u64,
}

impl SweepSpec {
    /// Depth 1..=14 with 14 features and no duplicates.
    pub fn depth_default() -> Self {
        SweepSpec {
            mode: SweepMode::Depth,
            values: (1..=14).collect(),
            depth: 0,
            features: 14,
            dups: 0,
            epsilon: 1e-3,
            seed: 0,
        }
    }

    /// 0..=7 duplicates at depth 8 with 8 features.
    pub fn dup_default() -> Self {
        SweepSpec {
            mode: SweepMode::Dup,
            values: (0..=7).collect(),
            depth: 8,
            features: 8,
            dups: 0,
            epsilon: 1e-3,
            seed: 0,
        }
    }

    fn gen_spec(&self, value: usize) -> GenSpec {
        match self.mode {
            SweepMode::Depth => GenSpec::new(value, self.features, self.dups, self.seed),
            SweepMode::Dup => GenSpec::new(self.depth, self.features, value, self.seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: usize,
    pub total_queries: u64,
    pub fault_runs: u64,
    pub normal_queries: u64,
    pub glitch_attempts: u64,
    pub leaves: usize,
}

pub const SWEEP_HEADER: &str = "parameter,total_queries,fault_runs,normal_queries,glitch_attempts,leaves";

/// One extraction per value, in parallel; rows come back in input order.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.values.is_empty() {
        return Err(Error::validation("values", "sweep range is empty"));
    }
    spec.values
        .par_iter()
        .map(|&value| {
            let tree = gen_complete(&spec.gen_spec(value))?;
            let config = ExtractionConfig::for_tree(&tree, spec.epsilon);
            let mut oracle = VictimOracle::deterministic(&tree);
            let out = tree_ext(&mut oracle, &config)?;
            Ok(SweepRow {
                parameter: value,
                total_queries: out.ledger.total_queries(),
                fault_runs: out.ledger.fault_runs,
                normal_queries: out.ledger.normal_queries,
                glitch_attempts: out.ledger.glitch_attempts,
                leaves: tree.leaf_count(),
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.parameter, r.total_queries, r.fault_runs, r.normal_queries, r.glitch_attempts, r.leaves
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Task;
    use crate::treegen::gen_random;

    #[test]
    fn reports_are_reproducible() {
        let t = gen_random(12, 5, 3, Task::Regression, 2).unwrap();
        for attack in [Attack::Barkbeetle, Attack::Baseline] {
            let mut opts = RunOptions::new(attack, 1e-3);
            opts.samples = 500;
            let (a, _) = run_attack(&t, &opts).unwrap();
            let (b, _) = run_attack(&t, &opts).unwrap();
            assert_eq!(a.to_json_untimed(), b.to_json_untimed());
            assert_eq!(a.equivalence.as_ref().unwrap().mismatches, 0);
        }
    }

    #[test]
    fn baseline_report_lists_boxes() {
        let t = gen_random(5, 3, 2, Task::Regression, 1).unwrap();
        let (r, tree) = run_attack(&t, &RunOptions::new(Attack::Baseline, 1e-3)).unwrap();
        assert!(tree.is_none());
        assert_eq!(r.boxes.as_ref().map(Vec::len), Some(5));
        assert_eq!(r.fault_runs, 0);
        let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in ["total_queries", "fault_runs", "glitch_attempts", "side_channel_probes", "paths", "wall_time"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn sweep_csv_shape() {
        let mut spec = SweepSpec::depth_default();
        spec.values = vec![1, 2, 3];
        let rows = run_sweep(&spec).unwrap();
        assert_eq!(rows.iter().map(|r| r.parameter).collect::<Vec<_>>(), vec![1, 2, 3]);
        let csv = sweep_csv(&rows);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], SWEEP_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("1,"));
    }
}
