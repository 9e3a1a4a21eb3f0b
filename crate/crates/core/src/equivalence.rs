//! Functional-equivalence checks between a ground-truth tree and a recovered one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::VictimTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub samples: u64,
    pub mismatches: u64,
    /// Largest |t_true - t_recovered| when both trees have the same shape.
    pub max_threshold_gap: Option<f64>,
}

impl EquivalenceReport {
    pub fn is_equivalent(&self) -> bool {
        self.mismatches == 0
    }
}

fn check_specs(a: &VictimTree, b: &VictimTree) -> Result<()> {
    if a.features() != b.features() {
        return Err(Error::FeatureMismatch(format!(
            "{} vs {} features or differing ranges",
            a.n_features(),
            b.n_features()
        )));
    }
    Ok(())
}

/// Compares predictions on `n_samples` inputs drawn uniformly from the
/// feature box.
pub fn functionally_equivalent(
    a: &VictimTree,
    b: &VictimTree,
    n_samples: u64,
    seed: u64,
) -> Result<EquivalenceReport> {
    check_specs(a, b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; a.n_features()];
    let mut mismatches = 0;
    for _ in 0..n_samples {
        for (xi, f) in x.iter_mut().zip(a.features()) {
            *xi = rng.gen_range(f.min..f.max);
        }
        if a.infer(&x)? != b.infer(&x)? {
            mismatches += 1;
        }
    }
    Ok(EquivalenceReport {
        samples: n_samples,
        mismatches,
        max_threshold_gap: a.aligned_threshold_gap(b),
    })
}

/// One axis of the evaluation grid, split at every threshold either tree
/// uses on that feature.
struct AxisCells {
    /// (number of grid points in the cell, one representative grid value)
    cells: Vec<(u64, f64)>,
}

fn axis_cells(min: f64, step: f64, points: u64, mut cuts: Vec<f64>) -> AxisCells {
    let value = |k: u64| min + k as f64 * step;
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // index of the first grid point >= t
    let first_at_or_above = |t: f64| {
        let (mut lo, mut hi) = (0u64, points);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if value(mid) < t {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        lo
    };
    let mut bounds = vec![0u64];
    bounds.extend(cuts.iter().map(|&t| first_at_or_above(t)));
    bounds.push(points);
    let cells = bounds
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[1] - w[0], value(w[0])))
        .collect();
    AxisCells { cells }
}

/// Counts grid points (step `step` from each feature's min, up to its max)
/// where the two trees disagree. The count is exact: both trees are
/// constant on every product of threshold-delimited cells, so one
/// representative per cell stands for all grid points inside it.
pub fn grid_mismatches(a: &VictimTree, b: &VictimTree, step: f64) -> Result<(u64, u64)> {
    check_specs(a, b)?;
    if !(step > 0.0) {
        return Err(Error::validation("step", "grid step must be positive"));
    }
    let axes: Vec<AxisCells> = a
        .features()
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let points = (f.width() / step).floor() as u64 + 1;
            let cuts = a
                .nodes()
                .iter()
                .chain(b.nodes())
                .filter(|n| n.feature == i)
                .map(|n| n.threshold)
                .collect();
            axis_cells(f.min, step, points, cuts)
        })
        .collect();

    let total: u64 = axes
        .iter()
        .map(|ax| ax.cells.iter().map(|c| c.0).sum::<u64>())
        .product();
    let mut mismatches = 0u64;
    let mut idx = vec![0usize; axes.len()];
    let mut x = vec![0.0; axes.len()];
    if axes.iter().any(|ax| ax.cells.is_empty()) {
        return Ok((0, total));
    }
    loop {
        let mut weight = 1u64;
        for (k, ax) in axes.iter().enumerate() {
            let (count, rep) = ax.cells[idx[k]];
            weight *= count;
            x[k] = rep;
        }
        if a.infer(&x)? != b.infer(&x)? {
            mismatches += weight;
        }
        // odometer increment
        let mut k = 0;
        loop {
            if k == axes.len() {
                return Ok((mismatches, total));
            }
            idx[k] += 1;
            if idx[k] < axes[k].cells.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}
