//! Distances between molecules and statistics over pairwise distances.

mod embedding;
mod mcs;
mod stats;

pub use embedding::EmbeddingTable;
pub use mcs::{maximum_common_subgraph, McsResult};
pub use stats::{
    moments, pairwise_distances, pairwise_stats, DistStats, Histogram, Moments, DEFAULT_MAX_PAIRS, HISTOGRAM_BINS,
};

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use log::warn;
use thiserror::Error;

use crate::fingerprint::{
    morgan_fingerprint, substructure_counts, FingerprintConfig, FingerprintError, MatchBudget, SubstructureLibrary,
};
use crate::molgraph::MolGraph;

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("no embedding row for molecule `{0}`")]
    MissingEmbedding(String),
    #[error("invalid metric parameters: {0}")]
    InvalidParams(String),
    #[error("metric points were prepared for a different metric")]
    PointMismatch,
    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },
    #[error("requested {n} neighbors from a pool of {pool}")]
    NeighborCount { n: usize, pool: usize },
    #[error("embedding table line {line}: {reason}")]
    EmbeddingFormat { line: usize, reason: String },
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A molecule as seen by distance functions: an identifier plus its graph.
#[derive(Debug, Clone)]
pub struct MoleculeRecord {
    pub id: String,
    pub graph: Arc<MolGraph>,
}

impl MoleculeRecord {
    pub fn new(id: impl Into<String>, graph: MolGraph) -> MoleculeRecord {
        MoleculeRecord {
            id: id.into(),
            graph: Arc::new(graph),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    TanimotoBinary,
    TanimotoCount,
    SubstructureJaccard,
    Mcs,
    EmbeddingEuclidean,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::TanimotoBinary => "tanimoto_binary",
            MetricKind::TanimotoCount => "tanimoto_count",
            MetricKind::SubstructureJaccard => "substructure_jaccard",
            MetricKind::Mcs => "mcs",
            MetricKind::EmbeddingEuclidean => "embedding_euclidean",
        }
    }

    /// Whether distances are bounded to [0, 1].
    pub fn is_bounded(self) -> bool {
        self != MetricKind::EmbeddingEuclidean
    }
}

impl std::str::FromStr for MetricKind {
    type Err = DistanceError;

    fn from_str(s: &str) -> Result<Self, DistanceError> {
        Ok(match s {
            "tanimoto_binary" | "tanimoto" => MetricKind::TanimotoBinary,
            "tanimoto_count" => MetricKind::TanimotoCount,
            "substructure_jaccard" | "substructure" => MetricKind::SubstructureJaccard,
            "mcs" => MetricKind::Mcs,
            "embedding_euclidean" | "embedding" => MetricKind::EmbeddingEuclidean,
            _ => return Err(DistanceError::InvalidParams(format!("unknown metric `{s}`"))),
        })
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub enum DistanceMetric {
    /// Jaccard distance over the nonzero positions of a folded fingerprint.
    TanimotoBinary {
        fingerprint: FingerprintConfig,
    },
    /// Generalized (min/max) Jaccard distance over folded counts.
    TanimotoCount {
        fingerprint: FingerprintConfig,
    },
    SubstructureJaccard {
        library: Arc<SubstructureLibrary>,
        budget: MatchBudget,
    },
    Mcs {
        budget: Option<Duration>,
    },
    /// Euclidean distance divided by `scale` (1 for raw distances).
    EmbeddingEuclidean {
        table: Arc<EmbeddingTable>,
        scale: f64,
    },
}

impl DistanceMetric {
    pub fn tanimoto_binary(fingerprint: FingerprintConfig) -> Result<DistanceMetric, DistanceError> {
        fingerprint.validate()?;
        Ok(DistanceMetric::TanimotoBinary { fingerprint })
    }

    pub fn tanimoto_count(fingerprint: FingerprintConfig) -> Result<DistanceMetric, DistanceError> {
        fingerprint.validate()?;
        Ok(DistanceMetric::TanimotoCount { fingerprint })
    }

    pub fn substructure_jaccard(
        library: Arc<SubstructureLibrary>,
        budget: MatchBudget,
    ) -> Result<DistanceMetric, DistanceError> {
        if library.is_empty() {
            return Err(DistanceError::InvalidParams("substructure library is empty".into()));
        }
        Ok(DistanceMetric::SubstructureJaccard { library, budget })
    }

    pub fn mcs(budget: Option<Duration>) -> DistanceMetric {
        DistanceMetric::Mcs { budget }
    }

    pub fn embedding_euclidean(table: Arc<EmbeddingTable>) -> DistanceMetric {
        DistanceMetric::EmbeddingEuclidean { table, scale: 1.0 }
    }

    /// Embedding distance scaled so the largest distance between any two of
    /// `ids` is 1. Falls back to raw distances when all rows coincide.
    pub fn embedding_euclidean_max_normalized(
        table: Arc<EmbeddingTable>,
        ids: &[&str],
    ) -> Result<DistanceMetric, DistanceError> {
        let rows = ids
            .iter()
            .map(|id| {
                table
                    .get(id)
                    .ok_or_else(|| DistanceError::MissingEmbedding(id.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut max: f64 = 0.0;
        for i in 0..rows.len() {
            for j in (i + 1)..rows.len() {
                max = max.max(euclidean(rows[i], rows[j]));
            }
        }
        let scale = if max > 0.0 { max } else { 1.0 };
        Ok(DistanceMetric::EmbeddingEuclidean { table, scale })
    }

    pub fn kind(&self) -> MetricKind {
        match self {
            DistanceMetric::TanimotoBinary { .. } => MetricKind::TanimotoBinary,
            DistanceMetric::TanimotoCount { .. } => MetricKind::TanimotoCount,
            DistanceMetric::SubstructureJaccard { .. } => MetricKind::SubstructureJaccard,
            DistanceMetric::Mcs { .. } => MetricKind::Mcs,
            DistanceMetric::EmbeddingEuclidean { .. } => MetricKind::EmbeddingEuclidean,
        }
    }

    /// Short text identifying the metric and its parameters.
    pub fn descriptor(&self) -> String {
        match self {
            DistanceMetric::TanimotoBinary { fingerprint: fp } | DistanceMetric::TanimotoCount { fingerprint: fp } => {
                format!(
                    "{}(radius={},width={},chirality={})",
                    self.kind(),
                    fp.radius,
                    fp.width,
                    fp.use_chirality
                )
            }
            DistanceMetric::SubstructureJaccard { library, .. } => {
                format!("{}(entries={})", self.kind(), library.len())
            }
            DistanceMetric::Mcs { budget } => match budget {
                Some(b) => format!("{}(budget_ms={})", self.kind(), b.as_millis()),
                None => format!("{}(budget=none)", self.kind()),
            },
            DistanceMetric::EmbeddingEuclidean { table, scale } if *scale != 1.0 => {
                format!("{}(dim={},scale={scale})", self.kind(), table.dimension())
            }
            DistanceMetric::EmbeddingEuclidean { table, .. } => {
                format!("{}(dim={})", self.kind(), table.dimension())
            }
        }
    }

    /// Computes whatever features this metric compares.
    pub fn prepare(&self, record: &MoleculeRecord) -> Result<MetricPoint, DistanceError> {
        match self {
            DistanceMetric::TanimotoBinary { fingerprint } => {
                let fp = morgan_fingerprint(&record.graph, fingerprint)?;
                Ok(MetricPoint::Bits(fp.support().to_vec()))
            }
            DistanceMetric::TanimotoCount { fingerprint } => {
                let fp = morgan_fingerprint(&record.graph, fingerprint)?;
                Ok(MetricPoint::Counts(fp.sparse().collect()))
            }
            DistanceMetric::SubstructureJaccard { library, budget } => {
                let counts = substructure_counts(&record.graph, library, *budget);
                let mut sparse = Vec::new();
                for (k, c) in counts.into_iter().enumerate() {
                    match c {
                        Ok(0) => {}
                        Ok(c) => sparse.push((k as u32, c)),
                        Err(_) => warn!(
                            "substructure `{}` exceeded its budget on `{}`; counted as 0",
                            library.entries()[k].0,
                            record.id
                        ),
                    }
                }
                Ok(MetricPoint::Counts(sparse))
            }
            DistanceMetric::Mcs { .. } => Ok(MetricPoint::Graph(record.graph.clone())),
            DistanceMetric::EmbeddingEuclidean { table, .. } => table
                .get(&record.id)
                .map(|v| MetricPoint::Vector(v.to_vec()))
                .ok_or_else(|| DistanceError::MissingEmbedding(record.id.clone())),
        }
    }

    pub fn prepare_all(&self, records: &[MoleculeRecord]) -> Result<Vec<MetricPoint>, DistanceError> {
        records.iter().map(|r| self.prepare(r)).collect()
    }

    /// Distance between two prepared points.
    pub fn measure(&self, a: &MetricPoint, b: &MetricPoint) -> Result<Measured, DistanceError> {
        let exact = |value| Measured {
            value,
            approximate: false,
        };
        match (self, a, b) {
            (DistanceMetric::TanimotoBinary { .. }, MetricPoint::Bits(x), MetricPoint::Bits(y)) => {
                Ok(exact(jaccard_sets(x, y)))
            }
            (
                DistanceMetric::TanimotoCount { .. } | DistanceMetric::SubstructureJaccard { .. },
                MetricPoint::Counts(x),
                MetricPoint::Counts(y),
            ) => Ok(exact(jaccard_counts(x, y))),
            (DistanceMetric::Mcs { budget }, MetricPoint::Graph(x), MetricPoint::Graph(y)) => {
                let result = maximum_common_subgraph(x, y, *budget);
                Ok(Measured {
                    value: mcs_distance(result.size, x.heavy_atom_count(), y.heavy_atom_count()),
                    approximate: !result.exact,
                })
            }
            (DistanceMetric::EmbeddingEuclidean { scale, .. }, MetricPoint::Vector(x), MetricPoint::Vector(y)) => {
                Ok(exact(euclidean(x, y) / scale))
            }
            _ => Err(DistanceError::PointMismatch),
        }
    }

    /// Prepares both records and measures their distance.
    pub fn distance(&self, a: &MoleculeRecord, b: &MoleculeRecord) -> Result<Measured, DistanceError> {
        self.measure(&self.prepare(a)?, &self.prepare(b)?)
    }
}

/// Features of one molecule, in the form its metric compares.
#[derive(Debug, Clone)]
pub enum MetricPoint {
    /// Sorted nonzero positions.
    Bits(Vec<u32>),
    /// Sorted `(position, count)` with nonzero counts.
    Counts(Vec<(u32, u32)>),
    Graph(Arc<MolGraph>),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub value: f64,
    /// Set when a search budget ran out and `value` is an upper bound.
    pub approximate: bool,
}

/// `1 − |A∩B| / |A∪B|` over sorted sets; 0 when both are empty.
pub fn jaccard_sets(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// `1 − Σ min / Σ max` over sorted sparse count vectors; 0 when both are empty.
pub fn jaccard_counts(a: &[(u32, u32)], b: &[(u32, u32)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut lo, mut hi) = (0u64, 0u64);
    while i < a.len() || j < b.len() {
        let ka = a.get(i).map_or(u32::MAX, |e| e.0);
        let kb = b.get(j).map_or(u32::MAX, |e| e.0);
        match ka.cmp(&kb) {
            Ordering::Less => {
                hi += a[i].1 as u64;
                i += 1;
            }
            Ordering::Greater => {
                hi += b[j].1 as u64;
                j += 1;
            }
            Ordering::Equal => {
                lo += a[i].1.min(b[j].1) as u64;
                hi += a[i].1.max(b[j].1) as u64;
                i += 1;
                j += 1;
            }
        }
    }
    if hi == 0 {
        0.0
    } else {
        1.0 - lo as f64 / hi as f64
    }
}

/// Dense form of [`jaccard_counts`].
pub fn jaccard_dense(a: &[u32], b: &[u32]) -> f64 {
    let (mut lo, mut hi) = (0u64, 0u64);
    for (&x, &y) in a.iter().zip(b) {
        lo += x.min(y) as u64;
        hi += x.max(y) as u64;
    }
    if hi == 0 {
        0.0
    } else {
        1.0 - lo as f64 / hi as f64
    }
}

/// `1 − 2·common / (n_a + n_b)`.
pub fn mcs_distance(common: usize, n_a: usize, n_b: usize) -> f64 {
    if n_a + n_b == 0 {
        return 0.0;
    }
    1.0 - 2.0 * common as f64 / (n_a + n_b) as f64
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub distance: f64,
}

/// The `n` pool entries closest to `query` in ascending distance, ties
/// broken by ascending pool index.
pub fn nearest_neighbors(
    metric: &DistanceMetric,
    query: &MetricPoint,
    pool: &[MetricPoint],
    n: usize,
) -> Result<Vec<Neighbor>, DistanceError> {
    if n == 0 || n > pool.len() {
        return Err(DistanceError::NeighborCount { n, pool: pool.len() });
    }
    let mut all = pool
        .iter()
        .enumerate()
        .map(|(index, p)| {
            Ok(Neighbor {
                index,
                distance: metric.measure(query, p)?.value,
            })
        })
        .collect::<Result<Vec<_>, DistanceError>>()?;
    let order = |a: &Neighbor, b: &Neighbor| a.distance.total_cmp(&b.distance).then(a.index.cmp(&b.index));
    if n < all.len() {
        all.select_nth_unstable_by(n - 1, order);
        all.truncate(n);
    }
    all.sort_by(order);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::parse_smiles;

    fn rec(id: &str, smiles: &str) -> MoleculeRecord {
        MoleculeRecord::new(id, parse_smiles(smiles).unwrap())
    }

    #[test]
    fn generalized_jaccard_example() {
        assert_eq!(jaccard_dense(&[2, 1, 0], &[1, 1, 1]), 0.5);
        assert_eq!(jaccard_counts(&[(0, 2), (1, 1)], &[(0, 1), (1, 1), (2, 1)]), 0.5);
        assert_eq!(jaccard_counts(&[], &[]), 0.0);
        assert_eq!(jaccard_sets(&[], &[]), 0.0);
        assert_eq!(jaccard_sets(&[1, 2], &[2, 3]), 1.0 - 1.0 / 3.0);
    }

    #[test]
    fn max_normalized_embedding() {
        let table = Arc::new(
            EmbeddingTable::new(
                2,
                vec![
                    ("a".into(), vec![0.0, 0.0]),
                    ("b".into(), vec![3.0, 4.0]),
                    ("c".into(), vec![0.0, 1.0]),
                ],
            )
            .unwrap(),
        );
        let m = DistanceMetric::embedding_euclidean_max_normalized(Arc::clone(&table), &["a", "b", "c"]).unwrap();
        let a = MoleculeRecord::new("a", parse_smiles("C").unwrap());
        let b = MoleculeRecord::new("b", parse_smiles("C").unwrap());
        let c = MoleculeRecord::new("c", parse_smiles("C").unwrap());
        assert_eq!(m.distance(&a, &b).unwrap().value, 1.0);
        assert_eq!(m.distance(&a, &c).unwrap().value, 0.2);
        assert!(m.descriptor().contains("scale=5"));
        let raw = DistanceMetric::embedding_euclidean(Arc::clone(&table));
        assert_eq!(raw.distance(&a, &b).unwrap().value, 5.0);
        assert!(DistanceMetric::embedding_euclidean_max_normalized(table, &["a", "zz"]).is_err());
    }

    #[test]
    fn mcs_ethane_ethanol() {
        let m = DistanceMetric::mcs(None);
        let d = m.distance(&rec("a", "CC"), &rec("b", "CCO")).unwrap();
        assert!((d.value - 0.2).abs() < 1e-15);
        assert!(!d.approximate);
    }

    #[test]
    fn identical_molecules_are_at_zero() {
        let lib = Arc::new(crate::fingerprint::default_library());
        let metrics = [
            DistanceMetric::tanimoto_binary(FingerprintConfig::default()).unwrap(),
            DistanceMetric::tanimoto_count(FingerprintConfig::default()).unwrap(),
            DistanceMetric::substructure_jaccard(lib, MatchBudget::default()).unwrap(),
            DistanceMetric::mcs(None),
        ];
        let a = rec("a", "CC(=O)Nc1ccc(O)cc1");
        for m in &metrics {
            assert_eq!(m.distance(&a, &a).unwrap().value, 0.0, "{}", m.kind());
        }
    }

    #[test]
    fn mismatched_points_are_rejected() {
        let m = DistanceMetric::mcs(None);
        let err = m.measure(&MetricPoint::Bits(vec![]), &MetricPoint::Bits(vec![]));
        assert!(matches!(err, Err(DistanceError::PointMismatch)));
    }

    #[test]
    fn neighbor_ordering_and_ties() {
        let table = EmbeddingTable::new(1, vec![]).unwrap();
        let m = DistanceMetric::embedding_euclidean(Arc::new(table));
        let q = MetricPoint::Vector(vec![0.0]);
        let pool: Vec<MetricPoint> = [0.3, 0.1, 0.2, 0.1]
            .iter()
            .map(|&x| MetricPoint::Vector(vec![x]))
            .collect();
        let nn = nearest_neighbors(&m, &q, &pool[..3], 2).unwrap();
        assert_eq!(nn.iter().map(|n| n.index).collect::<Vec<_>>(), vec![1, 2]);
        let nn = nearest_neighbors(&m, &q, &pool, 2).unwrap();
        assert_eq!(nn.iter().map(|n| n.index).collect::<Vec<_>>(), vec![1, 3]);
        assert!(nearest_neighbors(&m, &q, &pool, 5).is_err());
        assert!(nearest_neighbors(&m, &q, &pool, 0).is_err());
    }

    #[test]
    fn missing_embedding() {
        let table = EmbeddingTable::new(2, vec![("x".into(), vec![0.0, 1.0])]).unwrap();
        let m = DistanceMetric::embedding_euclidean(Arc::new(table));
        assert!(m.prepare(&rec("x", "C")).is_ok());
        assert!(matches!(
            m.prepare(&rec("y", "C")),
            Err(DistanceError::MissingEmbedding(id)) if id == "y"
        ));
    }
}
