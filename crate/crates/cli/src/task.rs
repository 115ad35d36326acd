//! A prepared train/test task: metric points, features and labels for both
//! splits, ready for training, scoring and sweeps.

use std::sync::Arc;

use sqrl_core::distance::{DistanceError, DistanceMetric, EmbeddingTable, MetricPoint, MoleculeRecord};
use sqrl_core::evaluation::TestSet;
use sqrl_core::fingerprint::{FingerprintConfig, FingerprintError};
use sqrl_core::regressor::{embedding_features, morgan_features, AnchorSet, FeatureSet, Featurizer};

use crate::dataset::{DataRow, DatasetManifest, Split};

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error("the {0} split is empty")]
    EmptySplit(Split),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error("no embedding row for molecule `{0}`")]
    MissingEmbedding(String),
}

/// Where per-molecule feature vectors come from.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    Morgan(FingerprintConfig),
    Embedding { table: Arc<EmbeddingTable>, source: String },
}

impl FeatureSource {
    pub fn featurizer(&self) -> Featurizer {
        match self {
            FeatureSource::Morgan(config) => Featurizer::Morgan { config: *config },
            FeatureSource::Embedding { table, source } => Featurizer::Embedding {
                dimension: table.dimension(),
                source: source.clone(),
            },
        }
    }

    pub fn features(&self, records: &[MoleculeRecord]) -> Result<FeatureSet, TaskError> {
        match self {
            FeatureSource::Morgan(cfg) => Ok(morgan_features(records, cfg)?),
            FeatureSource::Embedding { table, .. } => {
                embedding_features(records, table).map_err(TaskError::MissingEmbedding)
            }
        }
    }
}

pub struct Side {
    pub ids: Vec<String>,
    pub records: Vec<MoleculeRecord>,
    pub points: Vec<MetricPoint>,
    pub features: FeatureSet,
    pub y: Vec<f64>,
    pub is_cliff: Vec<bool>,
}

impl Side {
    fn build<'a>(
        rows: impl Iterator<Item = &'a DataRow>,
        metric: &DistanceMetric,
        source: &FeatureSource,
    ) -> Result<Side, TaskError> {
        let rows: Vec<&DataRow> = rows.collect();
        let records: Vec<MoleculeRecord> = rows
            .iter()
            .map(|r| MoleculeRecord {
                id: r.id.clone(),
                graph: Arc::clone(&r.graph),
            })
            .collect();
        Ok(Side {
            ids: rows.iter().map(|r| r.id.clone()).collect(),
            points: metric.prepare_all(&records)?,
            features: source.features(&records)?,
            y: rows.iter().map(|r| r.y).collect(),
            is_cliff: rows.iter().map(|r| r.is_cliff.unwrap_or(false)).collect(),
            records,
        })
    }
}

pub struct Task {
    pub metric: DistanceMetric,
    pub featurizer: Featurizer,
    pub train: Side,
    pub test: Side,
}

impl Task {
    pub fn prepare(
        manifest: &DatasetManifest,
        metric: DistanceMetric,
        source: &FeatureSource,
    ) -> Result<Task, TaskError> {
        for split in [Split::Train, Split::Test] {
            if manifest.count(split) == 0 {
                return Err(TaskError::EmptySplit(split));
            }
        }
        let train = Side::build(manifest.split(Split::Train), &metric, source)?;
        let test = Side::build(manifest.split(Split::Test), &metric, source)?;
        Ok(Task {
            featurizer: source.featurizer(),
            metric,
            train,
            test,
        })
    }

    pub fn anchors(&self) -> AnchorSet<'_> {
        AnchorSet {
            metric: &self.metric,
            points: &self.train.points,
            features: &self.train.features,
            y: &self.train.y,
        }
    }

    pub fn test_set(&self) -> TestSet<'_> {
        TestSet {
            ids: &self.test.ids,
            points: &self.test.points,
            features: &self.test.features,
            y: &self.test.y,
            is_cliff: &self.test.is_cliff,
        }
    }
}
