//! Distribution statistics over pairwise distances.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DistanceError, DistanceMetric, MetricPoint};

pub const DEFAULT_MAX_PAIRS: usize = 200_000;
pub const HISTOGRAM_BINS: usize = 50;

/// Population central moments of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
}

impl Moments {
    pub fn std(&self) -> f64 {
        self.m2.sqrt()
    }

    /// `m3 / m2^1.5`; `None` when the sample has no spread.
    pub fn skewness(&self) -> Option<f64> {
        (self.m2 > 0.0).then(|| self.m3 / self.m2.powf(1.5))
    }

    /// `m4 / m2² − 3`; `None` when the sample has no spread.
    pub fn excess_kurtosis(&self) -> Option<f64> {
        (self.m2 > 0.0).then(|| self.m4 / (self.m2 * self.m2) - 3.0)
    }
}

pub fn moments(values: &[f64]) -> Option<Moments> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let all_equal = values.iter().all(|&v| v == values[0]);
    Some(Moments {
        n: values.len(),
        mean,
        m2: if all_equal { 0.0 } else { m2 / n },
        m3: if all_equal { 0.0 } else { m3 / n },
        m4: if all_equal { 0.0 } else { m4 / n },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `counts.len() + 1` ascending edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over `[min, max]`; the last bin is closed.
    pub fn build(values: &[f64], bins: usize) -> Histogram {
        let bins = bins.max(1);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Histogram {
                edges: vec![0.0, 0.0],
                counts: vec![0],
            };
        }
        if min == max {
            return Histogram {
                edges: vec![min, max],
                counts: vec![values.len() as u64],
            };
        }
        let width = (max - min) / bins as f64;
        let edges = (0..=bins)
            .map(|k| if k == bins { max } else { min + width * k as f64 })
            .collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let k = (((v - min) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Histogram { edges, counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Fraction of mass at or below `x`, interpolating linearly inside a bin.
    pub fn mass_at_or_below(&self, x: f64) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (k, &c) in self.counts.iter().enumerate() {
            let (lo, hi) = (self.edges[k], self.edges[k + 1]);
            if x >= hi {
                acc += c as f64;
            } else if x >= lo {
                acc += c as f64 * (x - lo) / (hi - lo);
                break;
            } else {
                break;
            }
        }
        acc / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistStats {
    pub pairs: usize,
    pub mean: f64,
    pub std: f64,
    /// `None` when all distances are equal.
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub histogram: Histogram,
}

impl DistStats {
    pub fn from_distances(values: &[f64]) -> Option<DistStats> {
        let m = moments(values)?;
        Some(DistStats {
            pairs: values.len(),
            mean: m.mean,
            std: m.std(),
            skewness: m.skewness(),
            excess_kurtosis: m.excess_kurtosis(),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            histogram: Histogram::build(values, HISTOGRAM_BINS),
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.skewness.is_none()
    }
}

/// Distances over all unordered pairs, or over `max_pairs` distinct pairs
/// drawn uniformly with `seed` when there are more. Pairs are visited in
/// `(i, j)` order either way.
pub fn pairwise_distances(
    metric: &DistanceMetric,
    points: &[MetricPoint],
    max_pairs: usize,
    seed: u64,
) -> Result<Vec<f64>, DistanceError> {
    let n = points.len();
    if n < 2 {
        return Err(DistanceError::TooFewRecords { needed: 2, got: n });
    }
    if max_pairs == 0 {
        return Err(DistanceError::InvalidParams("max_pairs must be positive".into()));
    }
    let total = n * (n - 1) / 2;
    let mut out = Vec::with_capacity(total.min(max_pairs));
    if total <= max_pairs {
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(metric.measure(&points[i], &points[j])?.value);
            }
        }
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = sample(&mut rng, total, max_pairs).into_vec();
    picks.sort_unstable();
    let (mut row, mut row_start) = (0usize, 0usize);
    for k in picks {
        while k >= row_start + (n - 1 - row) {
            row_start += n - 1 - row;
            row += 1;
        }
        let j = row + 1 + (k - row_start);
        out.push(metric.measure(&points[row], &points[j])?.value);
    }
    Ok(out)
}

pub fn pairwise_stats(
    metric: &DistanceMetric,
    points: &[MetricPoint],
    max_pairs: usize,
    seed: u64,
) -> Result<DistStats, DistanceError> {
    let d = pairwise_distances(metric, points, max_pairs, seed)?;
    Ok(DistStats::from_distances(&d).expect("at least one pair"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::EmbeddingTable;
    use std::sync::Arc;

    #[test]
    fn moment_examples() {
        let s = DistStats::from_distances(&[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(s.mean, 0.5);
        assert_eq!(s.std, 0.0);
        assert!(s.skewness.is_none() && s.excess_kurtosis.is_none());

        let s = DistStats::from_distances(&[0.2, 0.4, 0.6]).unwrap();
        assert!(s.skewness.unwrap().abs() < 1e-12);

        // m2 = 3/16, m3 = 3/32: skew = (3/32) / (3/16)^1.5 = 2/√3
        let s = DistStats::from_distances(&[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.mean, 0.25);
        assert!((s.skewness.unwrap() - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert!((s.skewness.unwrap() - 1.1547).abs() < 1e-4);
        // m4 = 21/256: kurt = (21/256) / (9/256) − 3 = −2/3
        assert!((s.excess_kurtosis.unwrap() + 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn histogram_accounts_for_every_value() {
        let v: Vec<f64> = (0..1000).map(|k| (k as f64 * 0.618).fract()).collect();
        let h = Histogram::build(&v, 50);
        assert_eq!(h.total(), 1000);
        assert_eq!(h.edges.len(), 51);
        assert_eq!(h.mass_at_or_below(2.0), 1.0);
        assert_eq!(h.mass_at_or_below(-1.0), 0.0);
    }

    fn line_points(xs: &[f64]) -> (DistanceMetric, Vec<MetricPoint>) {
        let m = DistanceMetric::embedding_euclidean(Arc::new(EmbeddingTable::new(1, vec![]).unwrap()));
        (m, xs.iter().map(|&x| MetricPoint::Vector(vec![x])).collect())
    }

    #[test]
    fn all_pairs_when_under_cap() {
        let (m, p) = line_points(&[0.0, 1.0, 3.0]);
        assert_eq!(pairwise_distances(&m, &p, 10, 0).unwrap(), vec![1.0, 3.0, 2.0]);
        assert!(pairwise_distances(&m, &p[..1], 10, 0).is_err());
    }

    #[test]
    fn sampled_pairs_are_distinct_and_seeded() {
        let xs: Vec<f64> = (0..40).map(|k| (k * k) as f64).collect();
        let (m, p) = line_points(&xs);
        let a = pairwise_distances(&m, &p, 100, 7).unwrap();
        let b = pairwise_distances(&m, &p, 100, 7).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, b);
        // every squared-integer gap is a distinct pair value here
        let all = pairwise_distances(&m, &p, usize::MAX, 0).unwrap();
        for d in &a {
            assert!(all.contains(d));
        }
        let stats = pairwise_stats(&m, &p, 100, 7).unwrap();
        assert_eq!(stats.histogram.total(), 100);
    }
}
