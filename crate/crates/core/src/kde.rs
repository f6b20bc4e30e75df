//! One-dimensional Gaussian kernel density estimation over trust scores and
//! the honest-segment cut at the last local minimum of the density.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::ClientId;

/// Number of evaluation points on the density grid.
pub const GRID_POINTS: usize = 1000;

/// Bandwidth returned when every score coincides (no spread to smooth).
pub const DEGENERATE_BANDWIDTH: f64 = 1e-9;

/// Neighbor fraction used by [`estimate_bandwidth`] unless configured otherwise.
pub const DEFAULT_QUANTILE: f64 = 0.3;

/// A density evaluated on a uniform grid spanning `[0, max(scores) + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    pub fn spacing(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    /// Left Riemann sum of the density over the grid.
    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.spacing()
    }
}

/// Mean over points of the distance to the farthest of its `n_neighbors`
/// nearest other points, with `n_neighbors = max(1, floor(quantile * n))`.
pub fn estimate_bandwidth(scores: &[f64], quantile: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::InvalidValue(format!(
            "bandwidth quantile must lie in (0, 1], got {quantile}"
        )));
    }
    let n = scores.len();
    if n == 1 {
        return Ok(DEGENERATE_BANDWIDTH);
    }
    let k = ((quantile * n as f64).floor() as usize).clamp(1, n - 1);
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut total = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        // The k nearest others of a point in sorted order form a contiguous
        // window around it; grow it greedily from both sides.
        let (mut lo, mut hi) = (i, i);
        let mut farthest = 0.0f64;
        for _ in 0..k {
            let left = (lo > 0).then(|| x - sorted[lo - 1]);
            let right = (hi + 1 < n).then(|| sorted[hi + 1] - x);
            let step = match (left, right) {
                (Some(l), Some(r)) if l <= r => {
                    lo -= 1;
                    l
                }
                (Some(_), Some(r)) => {
                    hi += 1;
                    r
                }
                (Some(l), None) => {
                    lo -= 1;
                    l
                }
                (None, Some(r)) => {
                    hi += 1;
                    r
                }
                (None, None) => unreachable!("k is at most n - 1"),
            };
            farthest = farthest.max(step);
        }
        total += farthest;
    }
    let bandwidth = total / n as f64;
    Ok(if bandwidth <= DEGENERATE_BANDWIDTH {
        DEGENERATE_BANDWIDTH
    } else {
        bandwidth
    })
}

fn gaussian(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Evenly spaced grid over `[0, max(scores) + 1]`, endpoints included.
pub fn density_grid(scores: &[f64]) -> Vec<f64> {
    let upper = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let step = upper / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| i as f64 * step).collect()
}

/// Gaussian KDE of `scores` with bandwidth `h`, evaluated at `x`.
pub fn density_at(scores: &[f64], h: f64, x: f64) -> f64 {
    scores.iter().map(|&s| gaussian((x - s) / h)).sum::<f64>() / (scores.len() as f64 * h)
}

/// Gaussian KDE of `scores` evaluated on [`density_grid`].
pub fn kde_density(scores: &[f64], bandwidth: f64) -> Result<DensityCurve> {
    if scores.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidValue(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let grid = density_grid(scores);
    let density = grid.iter().map(|&x| density_at(scores, bandwidth, x)).collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth,
    })
}

/// Grid values at strict interior minima: a strict decrease into the point
/// followed by a strict increase out of it. Plateaus never qualify.
pub fn find_local_minima(curve: &DensityCurve) -> Vec<f64> {
    let d = &curve.density;
    (1..d.len().saturating_sub(1))
        .filter(|&i| d[i] - d[i - 1] < 0.0 && d[i + 1] - d[i] > 0.0)
        .map(|i| curve.grid[i])
        .collect()
}

/// Full result of one segmentation pass.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub bandwidth: f64,
    /// Cut point; `None` when the density has no valley or is degenerate.
    pub boundary: Option<f64>,
    pub honest: Vec<ClientId>,
}

pub fn segment(
    scores: &BTreeMap<ClientId, f64>,
    sampled: &[ClientId],
    quantile: f64,
) -> Result<Segmentation> {
    if sampled.is_empty() {
        return Err(Error::EmptyAggregate);
    }
    let mut ids = sampled.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let values = ids
        .iter()
        .map(|id| {
            scores
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidValue(format!("client {id} has no trust score")))
        })
        .collect::<Result<Vec<f64>>>()?;

    let bandwidth = estimate_bandwidth(&values, quantile)?;
    let boundary = if bandwidth <= DEGENERATE_BANDWIDTH {
        None
    } else {
        let curve = kde_density(&values, bandwidth)?;
        find_local_minima(&curve).last().copied()
    };
    let honest = match boundary {
        Some(cut) => ids
            .iter()
            .zip(&values)
            .filter(|(_, &s)| s >= cut)
            .map(|(id, _)| *id)
            .collect(),
        None => ids,
    };
    Ok(Segmentation {
        bandwidth,
        boundary,
        honest,
    })
}

/// Clients whose trust lies at or above the last density valley, in
/// ascending id order. Everyone is honest when no valley exists.
pub fn segment_honest(
    scores: &BTreeMap<ClientId, f64>,
    sampled: &[ClientId],
    quantile: f64,
) -> Result<Vec<ClientId>> {
    segment(scores, sampled, quantile).map(|s| s.honest)
}
