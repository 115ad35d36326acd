//! Similarity-thresholded pair datasets of relative labels.

use std::io::Write;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{DistStats, DistanceError, DistanceMetric, MetricPoint};

pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.9;

#[derive(Debug, Error)]
pub enum PairingError {
    #[error("need at least 2 molecules, got {0}")]
    TooFewRecords(usize),
    #[error("alpha must be positive, got {0}")]
    InvalidAlpha(f64),
    #[error("{points} feature points but {labels} labels")]
    LengthMismatch { points: usize, labels: usize },
    #[error("fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("cannot suggest a threshold: {0}; set alpha manually")]
    DegenerateStats(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub i: usize,
    pub j: usize,
    pub dist: f64,
    /// `y[i] − y[j]`.
    pub delta_y: f64,
}

/// Upper-triangular pairwise distances of one molecule set, computed once so
/// pair sets at several thresholds can share them.
#[derive(Debug, Clone)]
pub struct CondensedDistances {
    n: usize,
    values: Vec<f64>,
    approximate: usize,
}

impl CondensedDistances {
    pub fn compute(metric: &DistanceMetric, points: &[MetricPoint]) -> Result<CondensedDistances, PairingError> {
        let n = points.len();
        let mut values = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        let mut approximate = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                let m = metric.measure(&points[i], &points[j])?;
                approximate += m.approximate as usize;
                values.push(m.value);
            }
        }
        if approximate > 0 {
            warn!("{approximate} pair distances hit the search budget and are approximate");
        }
        Ok(CondensedDistances { n, values, approximate })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of pairs whose distance is an approximation.
    pub fn approximate_count(&self) -> usize {
        self.approximate
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        a * (2 * self.n - a - 1) / 2 + (b - a - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.values[self.offset(i, j)]
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativePairSet {
    pub pairs: Vec<PairRecord>,
    pub alpha: f64,
    /// Descriptor of the metric the distances were measured with.
    pub metric: String,
    pub source_size: usize,
}

impl RelativePairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// An empty set cannot be trained on.
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Molecules that appear in at least one pair.
    pub fn covered_molecules(&self) -> usize {
        let mut seen = vec![false; self.source_size];
        for p in &self.pairs {
            seen[p.i] = true;
        }
        seen.into_iter().filter(|&s| s).count()
    }

    /// Writes `i,j,dist,delta_y` rows after a `#` header comment.
    pub fn write_csv<W: Write>(&self, mut out: W, dataset_hash: &str) -> std::io::Result<()> {
        writeln!(
            out,
            "# metric={} alpha={} source_size={} dataset_hash={}",
            self.metric, self.alpha, self.source_size, dataset_hash
        )?;
        writeln!(out, "i,j,dist,delta_y")?;
        for p in &self.pairs {
            writeln!(out, "{},{},{},{}", p.i, p.j, p.dist, p.delta_y)?;
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<(), PairingError> {
    if alpha > 0.0 {
        Ok(())
    } else {
        Err(PairingError::InvalidAlpha(alpha))
    }
}

/// All ordered pairs `(i, j)`, `i ≠ j`, with distance ≤ `alpha`, sorted by
/// `(i, j)`.
pub fn pairs_from_distances(
    distances: &CondensedDistances,
    y: &[f64],
    alpha: f64,
    metric: &str,
) -> Result<RelativePairSet, PairingError> {
    check_alpha(alpha)?;
    let n = distances.len();
    if n < 2 {
        return Err(PairingError::TooFewRecords(n));
    }
    if y.len() != n {
        return Err(PairingError::LengthMismatch {
            points: n,
            labels: y.len(),
        });
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let dist = distances.get(i, j);
            if dist <= alpha {
                let delta_y = if i < j { y[i] - y[j] } else { -(y[j] - y[i]) };
                pairs.push(PairRecord { i, j, dist, delta_y });
            }
        }
    }
    if pairs.is_empty() {
        warn!("no pairs within alpha = {alpha} under {metric}");
    }
    Ok(RelativePairSet {
        pairs,
        alpha,
        metric: metric.to_string(),
        source_size: n,
    })
}

pub fn build_relative_dataset(
    points: &[MetricPoint],
    y: &[f64],
    metric: &DistanceMetric,
    alpha: f64,
) -> Result<RelativePairSet, PairingError> {
    check_alpha(alpha)?;
    if points.len() < 2 {
        return Err(PairingError::TooFewRecords(points.len()));
    }
    let distances = CondensedDistances::compute(metric, points)?;
    pairs_from_distances(&distances, y, alpha, &metric.descriptor())
}

/// `fraction × mean`, a threshold just below the average pairwise distance.
pub fn suggest_threshold(stats: &DistStats, fraction: f64) -> Result<f64, PairingError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(PairingError::InvalidFraction(fraction));
    }
    if !stats.mean.is_finite() {
        return Err(PairingError::DegenerateStats("mean distance is not finite".into()));
    }
    if stats.mean <= 0.0 {
        return Err(PairingError::DegenerateStats("mean distance is zero".into()));
    }
    if stats.is_degenerate() {
        return Err(PairingError::DegenerateStats("all pairwise distances are equal".into()));
    }
    Ok(fraction * stats.mean)
}

/// Expected number of ordered pairs at `alpha`: `N(N−1)` times the histogram
/// mass at or below `alpha`.
pub fn pair_budget(dataset_size: usize, alpha: f64, stats: &DistStats) -> f64 {
    let all = dataset_size as f64 * dataset_size.saturating_sub(1) as f64;
    all * stats.histogram.mass_at_or_below(alpha)
}
