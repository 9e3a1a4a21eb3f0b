//! Suffix recovery for one path: first-feature discovery followed by
//! duplicate-feature discovery.
//!
//! A path is known down to `start`; positions `start..β` are recovered here.
//! For each feature two chains are possible: nodes the path passes on the
//! left (`x < t`, an upper bound) and nodes it passes on the right (a lower
//! bound). A chain is discovered bottom-up. Its deepest node is found with
//! a normal search, every further node with a search that faults the node
//! just below it.

use crate::error::{Error, Result};
use crate::oracle::{FaultSpec, Oracle};
use crate::tree::Branch;

use super::search::{fabs, SearchRequest};
use super::{observe, ExtractionConfig, LeafKey, RecoveredPath};

/// One feature/direction chain on a path under recovery.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub feature: usize,
    /// Direction the path takes at every node of the chain.
    pub flag: Branch,
    /// Position of the most recently recovered node.
    pub node: usize,
    /// Value just across that node's threshold.
    pub outside: f64,
    /// Value just inside that node's threshold.
    pub inside: f64,
    /// Farthest value the chain may reach without disturbing the prefix.
    pub limit: f64,
    /// Leaf reached when `node` is forced toward `flag` with the feature at
    /// `inside`. Observed lazily.
    pub baseline: Option<LeafKey>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Bounds {
    /// Smallest threshold among prefix nodes passed on the left.
    hi: Option<f64>,
    /// Largest threshold among prefix nodes passed on the right.
    lo: Option<f64>,
}

fn prefix_bounds(path: &RecoveredPath, start: usize, d: usize) -> Result<Vec<Bounds>> {
    let mut bounds = vec![Bounds::default(); d];
    for (pos, node) in path.nodes[..start].iter().enumerate() {
        let (f, t, br) = node
            .known()
            .ok_or_else(|| Error::Stalled(format!("prefix node {pos} is not recovered")))?;
        let b = &mut bounds[f];
        match br {
            Branch::Left => b.hi = Some(b.hi.map_or(t, |h| h.min(t))),
            Branch::Right => b.lo = Some(b.lo.map_or(t, |l| l.max(t))),
        }
    }
    Ok(bounds)
}

/// Unknown positions in `start..end`, deepest first.
fn unknown_positions(path: &RecoveredPath, start: usize, end: usize) -> Vec<usize> {
    (start..end.min(path.beta()))
        .rev()
        .filter(|&j| !path.nodes[j].is_known())
        .collect()
}

fn with_value(x: &[f64], feature: usize, value: f64) -> Vec<f64> {
    let mut v = x.to_vec();
    v[feature] = value;
    v
}

/// Finds which of `candidates` (deepest first) diverts `probe` away from
/// `target`: the one whose fault toward `flag` brings the run back.
fn locate<O: Oracle>(
    oracle: &mut O,
    probe: &[f64],
    flag: Branch,
    target: LeafKey,
    candidates: &[usize],
) -> Result<usize> {
    if let [only] = candidates {
        return Ok(*only);
    }
    for &j in candidates {
        if observe(oracle, probe, Some(FaultSpec::new(j, flag)))? == target {
            return Ok(j);
        }
    }
    Err(Error::Inconsistent(format!(
        "no fault among positions {candidates:?} restores {target}"
    )))
}

fn clamp(config: &ExtractionConfig, feature: usize, t: f64) -> f64 {
    let spec = &config.feature_specs[feature];
    t.clamp(spec.min, spec.max)
}

/// First-feature discovery: recovers the deepest node of every chain on
/// the suffix `start..β` of `path`, with `x` reaching its leaf.
pub fn ffd<O: Oracle>(
    oracle: &mut O,
    config: &ExtractionConfig,
    path: &mut RecoveredPath,
    x: &[f64],
    start: usize,
) -> Result<Vec<Chain>> {
    let target = path.key();
    let bounds = prefix_bounds(path, start, config.n_features())?;
    let mut chains = Vec::new();

    for (k, spec) in config.feature_specs.iter().enumerate() {
        for flag in [Branch::Left, Branch::Right] {
            if unknown_positions(path, start, path.beta()).is_empty() {
                return Ok(chains);
            }
            let xk = x[k];
            let limit = match flag {
                Branch::Left => bounds[k].hi.map_or(spec.max + 1.0, |h| h - config.nudge(k)),
                Branch::Right => bounds[k].lo.unwrap_or(spec.min - 1.0),
            };
            let room = match flag {
                Branch::Left => xk < limit && xk < spec.max,
                Branch::Right => xk > limit && xk >= spec.min,
            };
            if !room {
                continue;
            }
            let moved = observe(oracle, &with_value(x, k, limit), None)?;
            if moved == target {
                continue;
            }
            let (low, high) = match flag {
                Branch::Left => (xk, limit),
                Branch::Right => (limit, xk),
            };
            let found = fabs(
                oracle,
                &SearchRequest {
                    x,
                    feature: k,
                    low,
                    high,
                    baseline: target,
                    fault_node: None,
                    flag,
                    epsilon: config.precision,
                    far_end: Some(moved),
                },
            )?;
            let end = path.beta().min(found.outside_key.depth);
            let candidates = unknown_positions(path, start, end);
            let probe = with_value(x, k, found.outside);
            let p = locate(oracle, &probe, flag, target, &candidates)?;
            path.nodes[p].set(k, clamp(config, k, found.threshold()), flag)?;
            chains.push(Chain {
                feature: k,
                flag,
                node: p,
                outside: found.outside,
                inside: found.inside,
                limit,
                baseline: Some(target),
            });
        }
    }
    Ok(chains)
}

/// Duplicate-feature discovery: climbs every chain toward the root until
/// the suffix is fully recovered.
pub fn dfd<O: Oracle>(
    oracle: &mut O,
    config: &ExtractionConfig,
    path: &mut RecoveredPath,
    x: &[f64],
    start: usize,
    mut chains: Vec<Chain>,
) -> Result<()> {
    while !chains.is_empty() {
        let mut next = Vec::with_capacity(chains.len());
        for mut chain in chains {
            if climb(oracle, config, path, x, start, &mut chain)? {
                next.push(chain);
            }
        }
        chains = next;
    }
    if let Some(&j) = unknown_positions(path, start, path.beta()).last() {
        return Err(Error::Stalled(format!(
            "position {j} of a {}-node path to {} is still unknown; recovered: {}",
            path.beta(),
            path.label,
            describe(path)
        )));
    }
    Ok(())
}

/// One step up `chain`. Returns whether the chain may continue.
fn climb<O: Oracle>(
    oracle: &mut O,
    config: &ExtractionConfig,
    path: &mut RecoveredPath,
    x: &[f64],
    start: usize,
    chain: &mut Chain,
) -> Result<bool> {
    let k = chain.feature;
    let above = unknown_positions(path, start, chain.node);
    let (low, high) = match chain.flag {
        Branch::Left => (chain.outside, chain.limit),
        Branch::Right => (chain.limit, chain.outside),
    };
    if above.is_empty() || !(low < high) {
        return Ok(false);
    }
    let baseline = match chain.baseline {
        Some(b) => b,
        None => observe(oracle, &with_value(x, k, chain.inside), None)?,
    };
    chain.baseline = Some(baseline);

    let far = observe(
        oracle,
        &with_value(x, k, chain.limit),
        Some(FaultSpec::new(chain.node, chain.flag)),
    )?;
    if far == baseline {
        return Ok(false);
    }
    let found = fabs(
        oracle,
        &SearchRequest {
            x,
            feature: k,
            low,
            high,
            baseline,
            fault_node: Some(chain.node),
            flag: chain.flag,
            epsilon: config.precision,
            far_end: Some(far),
        },
    )?;
    let (p, next_baseline) = if let [only] = above.as_slice() {
        (*only, None)
    } else {
        // leaf the new node leads to once it is forced back toward `flag`
        let target = observe(oracle, &with_value(x, k, found.inside), None)?;
        let probe = with_value(x, k, found.outside);
        let across = observe(oracle, &probe, None)?;
        let candidates = unknown_positions(path, start, chain.node.min(across.depth));
        (locate(oracle, &probe, chain.flag, target, &candidates)?, Some(target))
    };
    path.nodes[p].set(k, clamp(config, k, found.threshold()), chain.flag)?;
    chain.node = p;
    chain.outside = found.outside;
    chain.inside = found.inside;
    chain.baseline = next_baseline;
    Ok(true)
}

fn describe(path: &RecoveredPath) -> String {
    path.nodes
        .iter()
        .map(|n| match n.known() {
            Some((f, t, Branch::Left)) => format!("x{f}<{t}"),
            Some((f, t, Branch::Right)) => format!("x{f}>={t}"),
            None => "?".to_string(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}
