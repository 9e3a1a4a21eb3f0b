//! Fault-assisted binary search for a single split threshold.

use crate::error::{Error, Result};
use crate::oracle::{FaultSpec, Oracle};
use crate::tree::Branch;

use super::{observe, LeafKey};

/// One threshold search along `feature`, all other inputs fixed.
///
/// With `flag = Left` the baseline label sits at the `low` end and the
/// search walks upward; with `flag = Right` it sits at the `high` end. When
/// `fault_node` is set every probe forces that traversal position toward
/// `flag`, which removes the influence of a node already recovered.
#[derive(Debug, Clone)]
pub struct SearchRequest<'x> {
    pub x: &'x [f64],
    pub feature: usize,
    pub low: f64,
    pub high: f64,
    pub baseline: LeafKey,
    pub fault_node: Option<usize>,
    pub flag: Branch,
    pub epsilon: f64,
    /// Key already observed at the non-baseline end; queried when absent.
    pub far_end: Option<LeafKey>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOutcome {
    /// Last value that still produced the baseline.
    pub inside: f64,
    /// Last value that did not.
    pub outside: f64,
    /// What the oracle returned at `outside`.
    pub outside_key: LeafKey,
    /// Midpoint probes spent (bracket checks excluded).
    pub probes: u32,
}

impl SearchOutcome {
    /// Recovered threshold: the upper end of the final bracket, i.e. the
    /// smallest value known to go right at the split.
    pub fn threshold(&self) -> f64 {
        self.inside.max(self.outside)
    }

    pub fn width(&self) -> f64 {
        (self.outside - self.inside).abs()
    }
}

/// Binary search until the bracket is narrower than `epsilon`.
pub fn fabs<O: Oracle>(oracle: &mut O, req: &SearchRequest<'_>) -> Result<SearchOutcome> {
    if !(req.low < req.high) || !(req.epsilon > 0.0) {
        return Err(Error::validation(
            "search",
            format!(
                "need low < high and epsilon > 0, got [{}, {}] eps {}",
                req.low, req.high, req.epsilon
            ),
        ));
    }
    let fault = req.fault_node.map(|p| FaultSpec::new(p, req.flag));
    let (mut inside, mut outside) = match req.flag {
        Branch::Left => (req.low, req.high),
        Branch::Right => (req.high, req.low),
    };
    let mut x = req.x.to_vec();

    let mut outside_key = match req.far_end {
        Some(k) => k,
        None => {
            x[req.feature] = outside;
            observe(oracle, &x, fault)?
        }
    };
    if outside_key == req.baseline {
        return Err(Error::NoThresholdInRange {
            feature: req.feature,
            low: req.low,
            high: req.high,
        });
    }

    let mut probes = 0;
    while (outside - inside).abs() >= req.epsilon {
        let mid = inside + (outside - inside) / 2.0;
        if mid == inside || mid == outside {
            break; // no representable midpoint left
        }
        x[req.feature] = mid;
        let key = observe(oracle, &x, fault)?;
        probes += 1;
        if key == req.baseline {
            inside = mid;
        } else {
            outside = mid;
            outside_key = key;
        }
    }
    Ok(SearchOutcome {
        inside,
        outside,
        outside_key,
        probes,
    })
}
