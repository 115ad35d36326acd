//! Molecular property prediction from relative differences between
//! structurally similar molecules.
//!
//! SMILES strings parse into [`MolGraph`]s, which are featurized with Morgan
//! fingerprints or looked up in an embedding table. Pairs of training
//! molecules within a distance threshold form a [`RelativePairSet`]; a
//! [`RegressorModel`] learns their label differences and predicts new
//! molecules relative to their nearest training anchors.

pub mod distance;
pub mod evaluation;
pub mod fingerprint;
pub mod molgraph;
pub mod pairing;
pub mod regressor;

pub use distance::{DistanceMetric, MetricKind, MetricPoint, MoleculeRecord};
pub use evaluation::{EvalReport, Method};
pub use fingerprint::{Fingerprint, FingerprintConfig};
pub use molgraph::{parse_smiles, MolGraph};
pub use pairing::{PairRecord, RelativePairSet};
pub use regressor::{FeatureSet, MlpConfig, RegressorModel, TrainingMode};
