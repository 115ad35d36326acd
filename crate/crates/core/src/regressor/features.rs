//! Per-molecule feature vectors and the model inputs derived from them.

use serde::{Deserialize, Serialize};

use crate::distance::{EmbeddingTable, MoleculeRecord};
use crate::fingerprint::{morgan_fingerprint, FingerprintConfig, FingerprintError};

/// Sorted `(position, value)` entries of a vector with zeros omitted.
pub type SparseRow = Vec<(u32, f64)>;

/// One feature vector g(x) per molecule, all of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    dim: usize,
    rows: Vec<SparseRow>,
}

impl FeatureSet {
    /// Panics if a row index lies outside `dim` or rows are unsorted.
    pub fn new(dim: usize, rows: Vec<SparseRow>) -> FeatureSet {
        for row in &rows {
            assert!(row.windows(2).all(|w| w[0].0 < w[1].0), "unsorted sparse row");
            assert!(
                row.last().map_or(true, |e| (e.0 as usize) < dim),
                "row exceeds dimension"
            );
        }
        FeatureSet { dim, rows }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> FeatureSet {
        let dim = rows.first().map_or(0, Vec::len);
        let rows = rows
            .iter()
            .map(|r| {
                assert_eq!(r.len(), dim, "ragged dense rows");
                dense_to_sparse(r)
            })
            .collect();
        FeatureSet { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &SparseRow {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(k, v) in &self.rows[i] {
            out[k as usize] = v;
        }
        out
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureSet {
        FeatureSet {
            dim: self.dim,
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

pub fn dense_to_sparse(values: &[f64]) -> SparseRow {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(k, &v)| (k as u32, v))
        .collect()
}

/// How a molecule is turned into g(x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Featurizer {
    Morgan {
        config: FingerprintConfig,
    },
    /// Rows of an imported embedding table; `source` names the file.
    Embedding {
        dimension: usize,
        source: String,
    },
}

impl Featurizer {
    pub fn dimension(&self) -> usize {
        match self {
            Featurizer::Morgan { config } => config.width,
            Featurizer::Embedding { dimension, .. } => *dimension,
        }
    }
}

pub fn morgan_features(records: &[MoleculeRecord], config: &FingerprintConfig) -> Result<FeatureSet, FingerprintError> {
    let rows = records
        .iter()
        .map(|r| {
            let fp = morgan_fingerprint(&r.graph, config)?;
            Ok(fp.sparse().map(|(k, v)| (k, v as f64)).collect())
        })
        .collect::<Result<Vec<SparseRow>, FingerprintError>>()?;
    Ok(FeatureSet {
        dim: config.width,
        rows,
    })
}

/// Embedding rows for `records`; `Err(id)` names the first missing molecule.
pub fn embedding_features(records: &[MoleculeRecord], table: &EmbeddingTable) -> Result<FeatureSet, String> {
    let rows = records
        .iter()
        .map(|r| table.get(&r.id).map(dense_to_sparse).ok_or_else(|| r.id.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(FeatureSet {
        dim: table.dimension(),
        rows,
    })
}

/// `a − b` over sparse rows, dropping exact zeros.
pub fn sparse_difference(a: &[(u32, f64)], b: &[(u32, f64)], out: &mut SparseRow) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let ka = a.get(i).map_or(u32::MAX, |e| e.0);
        let kb = b.get(j).map_or(u32::MAX, |e| e.0);
        let (k, v) = if ka < kb {
            i += 1;
            (ka, a[i - 1].1)
        } else if kb < ka {
            j += 1;
            (kb, -b[j - 1].1)
        } else {
            i += 1;
            j += 1;
            (ka, a[i - 1].1 - b[j - 1].1)
        };
        if v != 0.0 {
            out.push((k, v));
        }
    }
}

/// What the network sees for a molecule pair or a single molecule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputMode {
    /// `g(a) − g(b)`.
    #[default]
    Difference,
    /// `[g(a) − g(b), g(a), g(b)]`.
    Concat,
}

impl InputMode {
    pub fn input_dim(self, feature_dim: usize) -> usize {
        match self {
            InputMode::Difference => feature_dim,
            InputMode::Concat => 3 * feature_dim,
        }
    }
}

/// Per-feature multiplicative scaling fit on training molecules.
///
/// Only scale is applied. For difference inputs a shared offset cancels, and
/// for absolute inputs it is absorbed by the first-layer bias, so centering
/// would only destroy sparsity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub scale: Vec<f64>,
}

impl Scaler {
    /// `1 / std` per feature; constant features keep scale 1.
    pub fn fit(features: &FeatureSet, molecules: &[usize]) -> Scaler {
        let d = features.dim();
        let n = molecules.len().max(1) as f64;
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for &m in molecules {
            for &(k, v) in features.row(m) {
                sum[k as usize] += v;
                sq[k as usize] += v * v;
            }
        }
        let scale = (0..d)
            .map(|k| {
                let mean = sum[k] / n;
                let var = (sq[k] / n - mean * mean).max(0.0);
                if var > 1e-12 {
                    1.0 / var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Scaler { scale }
    }

    pub fn apply(&self, row: &mut SparseRow) {
        for (k, v) in row.iter_mut() {
            *v *= self.scale[*k as usize % self.scale.len()];
        }
    }
}

/// Builds the network input for the ordered pair `(a, b)`.
pub fn pair_input(mode: InputMode, dim: usize, a: &[(u32, f64)], b: &[(u32, f64)], out: &mut SparseRow) {
    sparse_difference(a, b, out);
    if mode == InputMode::Concat {
        let d = dim as u32;
        out.extend(a.iter().map(|&(k, v)| (k + d, v)));
        out.extend(b.iter().map(|&(k, v)| (k + 2 * d, v)));
    }
}
