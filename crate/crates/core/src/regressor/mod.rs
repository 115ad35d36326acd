//! The learnable model f: an MLP trained either on absolute labels
//! (standard) or on label differences between similar molecules (SQRL),
//! plus anchored inference and a k-nearest-neighbor baseline.

mod features;
mod mlp;

pub use features::{
    dense_to_sparse, embedding_features, morgan_features, pair_input, sparse_difference, FeatureSet, Featurizer,
    InputMode, Scaler, SparseRow,
};
pub use mlp::{Adam, Gradients, Layer, Mlp, Trace};

use std::collections::HashSet;
use std::path::Path;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{nearest_neighbors, DistanceError, DistanceMetric, MetricPoint, Neighbor};
use crate::pairing::RelativePairSet;

#[derive(Debug, Error)]
pub enum RegressorError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("pair set is empty; nothing to train on")]
    EmptyPairs,
    #[error("training set is empty")]
    EmptyTraining,
    #[error("feature dimension mismatch: expected {expected}, found {found}")]
    FeatureDimension { expected: usize, found: usize },
    #[error("molecule index {index} out of range for {len} feature rows")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("{what}: lengths differ ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },
    #[error("model was trained in {found} mode, {expected} mode required")]
    ModeMismatch {
        expected: TrainingMode,
        found: TrainingMode,
    },
    #[error("invalid checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainingMode {
    Standard,
    Sqrl,
}

impl std::fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainingMode::Standard => "standard",
            TrainingMode::Sqrl => "sqrl",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_sizes: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Random subset of training samples visited per epoch; all when `None`.
    #[serde(default)]
    pub max_samples_per_epoch: Option<usize>,
    #[serde(default)]
    pub standardize: bool,
    #[serde(default)]
    pub input_mode: InputMode,
}

impl MlpConfig {
    /// Relative-difference model: hidden [512, 256], dropout 0.2, lr 1e-5, batch 64.
    pub fn full_sqrl() -> MlpConfig {
        MlpConfig {
            hidden_sizes: vec![512, 256],
            dropout: 0.2,
            learning_rate: 1e-5,
            batch_size: 64,
            max_epochs: 500,
            patience: 30,
            seed: 0,
            max_samples_per_epoch: None,
            standardize: false,
            input_mode: InputMode::Difference,
        }
    }

    /// Absolute-label model: hidden [256, 256], dropout 0.0, lr 1e-4, batch 128.
    pub fn full_standard() -> MlpConfig {
        MlpConfig {
            hidden_sizes: vec![256, 256],
            dropout: 0.0,
            learning_rate: 1e-4,
            batch_size: 128,
            ..MlpConfig::full_sqrl()
        }
    }

    pub fn validate(&self) -> Result<(), RegressorError> {
        let bad = |m: &str| Err(RegressorError::InvalidConfig(m.into()));
        if self.hidden_sizes.is_empty() {
            return bad("at least one hidden layer is required");
        }
        if self.hidden_sizes.contains(&0) {
            return bad("hidden layer sizes must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive and finite");
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        if self.max_samples_per_epoch == Some(0) {
            return bad("max_samples_per_epoch must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub mode: TrainingMode,
    pub config: MlpConfig,
    pub featurizer: Featurizer,
    pub scaler: Option<Scaler>,
    pub net: Mlp,
    pub training_log: Vec<EpochLog>,
    /// Epoch whose weights were kept.
    pub best_epoch: usize,
}

const CHECKPOINT_FORMAT: &str = "sqrl-regressor";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: RegressorModel,
}

/// Random streams derived from one seed.
const STREAM_INIT: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_row(row: &[(u32, f64)], dim: usize) -> Result<(), RegressorError> {
    match row.last() {
        Some(&(k, _)) if k as usize >= dim => Err(RegressorError::FeatureDimension {
            expected: dim,
            found: k as usize + 1,
        }),
        _ => Ok(()),
    }
}

impl RegressorModel {
    pub fn input_dim(&self) -> usize {
        match self.mode {
            TrainingMode::Standard => self.featurizer.dimension(),
            TrainingMode::Sqrl => self.config.input_mode.input_dim(self.featurizer.dimension()),
        }
    }

    fn scaled(&self, row: &mut SparseRow) {
        if let Some(s) = &self.scaler {
            s.apply(row);
        }
    }

    /// f applied to the ordered pair `(a, b)`: the predicted `y(a) − y(b)`.
    pub fn relative(&self, a: &[(u32, f64)], b: &[(u32, f64)]) -> Result<f64, RegressorError> {
        self.require(TrainingMode::Sqrl)?;
        let dim = self.featurizer.dimension();
        check_row(a, dim)?;
        check_row(b, dim)?;
        let mut input = Vec::new();
        pair_input(self.config.input_mode, dim, a, b, &mut input);
        self.scaled(&mut input);
        Ok(self.net.forward(&input))
    }

    /// f(g(x)) for a model trained on absolute labels.
    pub fn predict_standard(&self, x: &[(u32, f64)]) -> Result<f64, RegressorError> {
        self.require(TrainingMode::Standard)?;
        check_row(x, self.featurizer.dimension())?;
        let mut input = x.to_vec();
        self.scaled(&mut input);
        Ok(self.net.forward(&input))
    }

    fn require(&self, mode: TrainingMode) -> Result<(), RegressorError> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(RegressorError::ModeMismatch {
                expected: mode,
                found: self.mode,
            })
        }
    }

    /// Checks internal consistency of shapes and weights.
    pub fn validate(&self) -> Result<(), RegressorError> {
        self.config.validate()?;
        self.net.validate().map_err(RegressorError::Checkpoint)?;
        let expected = self.input_dim();
        if self.net.input_dim() != expected {
            return Err(RegressorError::FeatureDimension {
                expected,
                found: self.net.input_dim(),
            });
        }
        let widths: Vec<usize> = self.net.layers[..self.net.layers.len() - 1]
            .iter()
            .map(|l| l.out_dim)
            .collect();
        if widths != self.config.hidden_sizes {
            return Err(RegressorError::Checkpoint(
                "layer widths disagree with hidden_sizes".into(),
            ));
        }
        if let Some(s) = &self.scaler {
            if s.scale.len() != self.featurizer.dimension() {
                return Err(RegressorError::Checkpoint(
                    "scaler length disagrees with feature dimension".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, RegressorError> {
        let ck = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            model: self.clone(),
        };
        Ok(serde_json::to_string(&ck)?)
    }

    pub fn from_json(text: &str) -> Result<RegressorModel, RegressorError> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(RegressorError::Checkpoint(format!("unknown format `{}`", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(RegressorError::Checkpoint(format!(
                "unsupported version {}",
                ck.version
            )));
        }
        ck.model.validate()?;
        Ok(ck.model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RegressorModel, RegressorError> {
        RegressorModel::from_json(&std::fs::read_to_string(path)?)
    }
}

struct Fitted {
    net: Mlp,
    log: Vec<EpochLog>,
    best_epoch: usize,
}

/// Mini-batch Adam on squared error with early stopping. `sample(s, row)`
/// fills the input for sample `s` and returns its target.
fn fit<F>(
    input_dim: usize,
    cfg: &MlpConfig,
    train: &[usize],
    val: &[usize],
    sample: F,
) -> Result<Fitted, RegressorError>
where
    F: Fn(usize, &mut SparseRow) -> f64,
{
    let mut net = Mlp::new(input_dim, &cfg.hidden_sizes, &mut rng_for(cfg.seed, STREAM_INIT));
    let mut opt = Adam::new(&net, cfg.learning_rate);
    let mut grads = Gradients::new(&net);
    let mut trace = Trace::default();
    let mut rng = rng_for(cfg.seed, STREAM_SHUFFLE);
    let mut order = train.to_vec();
    let mut row = Vec::new();

    let evaluate = |net: &Mlp, set: &[usize], row: &mut SparseRow| -> f64 {
        let mut total = 0.0;
        for &s in set {
            let t = sample(s, row);
            let e = net.forward(row) - t;
            total += e * e;
        }
        total / set.len() as f64
    };

    let mut best: Option<(f64, usize, Mlp)> = None;
    let mut log = Vec::new();
    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let visit = cfg.max_samples_per_epoch.map_or(order.len(), |m| m.min(order.len()));
        let mut epoch_loss = 0.0;
        for batch in order[..visit].chunks(cfg.batch_size) {
            grads.clear();
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for &s in batch {
                let t = sample(s, &mut row);
                let y = net.forward_train(&row, cfg.dropout, &mut rng, &mut trace);
                let e = y - t;
                batch_loss += e * e;
                net.backward(&row, &trace, 2.0 * e * scale, &mut grads);
            }
            if !batch_loss.is_finite() {
                return Err(RegressorError::Diverged {
                    epoch,
                    loss: batch_loss,
                });
            }
            epoch_loss += batch_loss;
            opt.step(&mut net, &grads);
        }
        let train_loss = epoch_loss / visit as f64;
        if !net.is_finite() {
            return Err(RegressorError::Diverged { epoch, loss: f64::NAN });
        }
        let val_loss = (!val.is_empty()).then(|| evaluate(&net, val, &mut row));
        if let Some(v) = val_loss {
            if !v.is_finite() {
                return Err(RegressorError::Diverged { epoch, loss: v });
            }
        }
        log.push(EpochLog {
            epoch,
            train_loss,
            val_loss,
        });
        debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:?}");
        let monitored = val_loss.unwrap_or(train_loss);
        match &best {
            Some((b, _, _)) if monitored >= *b => {}
            _ => best = Some((monitored, epoch, net.clone())),
        }
        let best_epoch = best.as_ref().map_or(0, |b| b.1);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    let (_, best_epoch, net) = best.expect("at least one epoch");
    Ok(Fitted { net, log, best_epoch })
}

fn sample_validation(items: &[usize], fraction: f64, seed: u64) -> HashSet<usize> {
    let count = (fraction * items.len() as f64).round() as usize;
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut rng_for(seed, STREAM_SPLIT));
    shuffled.into_iter().take(count.min(items.len())).collect()
}

fn check_fraction(val_fraction: f64) -> Result<(), RegressorError> {
    if (0.0..1.0).contains(&val_fraction) {
        Ok(())
    } else {
        Err(RegressorError::InvalidConfig("val_fraction must lie in [0, 1)".into()))
    }
}

fn check_featurizer(featurizer: &Featurizer, features: &FeatureSet) -> Result<(), RegressorError> {
    if featurizer.dimension() != features.dim() {
        return Err(RegressorError::FeatureDimension {
            expected: featurizer.dimension(),
            found: features.dim(),
        });
    }
    Ok(())
}

/// Trains f on pair differences: f(g_i − g_j) ≈ y_i − y_j.
///
/// Validation molecules are drawn from the molecules that appear in pairs.
/// Training pairs touch no validation molecule; validation pairs run from a
/// validation molecule to a training molecule, mirroring inference where
/// the anchor is always known. Without usable validation pairs, every pair
/// trains and early stopping watches the training loss.
pub fn train_sqrl(
    pairs: &RelativePairSet,
    features: &FeatureSet,
    featurizer: Featurizer,
    cfg: &MlpConfig,
    val_fraction: f64,
) -> Result<RegressorModel, RegressorError> {
    cfg.validate()?;
    check_fraction(val_fraction)?;
    check_featurizer(&featurizer, features)?;
    if pairs.is_empty() {
        return Err(RegressorError::EmptyPairs);
    }
    for p in &pairs.pairs {
        for index in [p.i, p.j] {
            if index >= features.len() {
                return Err(RegressorError::IndexOutOfRange {
                    index,
                    len: features.len(),
                });
            }
        }
    }

    let mut molecules: Vec<usize> = pairs.pairs.iter().map(|p| p.i).collect();
    molecules.dedup();
    let held = sample_validation(&molecules, val_fraction, cfg.seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (k, p) in pairs.pairs.iter().enumerate() {
        match (held.contains(&p.i), held.contains(&p.j)) {
            (false, false) => train.push(k),
            (true, false) => val.push(k),
            _ => {}
        }
    }
    if train.is_empty() || val.is_empty() {
        if val_fraction > 0.0 {
            warn!("no usable validation pairs; early stopping on training loss");
        }
        train = (0..pairs.len()).collect();
        val.clear();
    }
    let train_molecules: Vec<usize> = molecules.iter().copied().filter(|m| !held.contains(m)).collect();
    let scaler = cfg.standardize.then(|| {
        Scaler::fit(
            features,
            if train_molecules.is_empty() {
                &molecules
            } else {
                &train_molecules
            },
        )
    });

    let dim = features.dim();
    let mode = cfg.input_mode;
    let fitted = fit(mode.input_dim(dim), cfg, &train, &val, |k, row| {
        let p = &pairs.pairs[k];
        pair_input(mode, dim, features.row(p.i), features.row(p.j), row);
        if let Some(s) = &scaler {
            s.apply(row);
        }
        p.delta_y
    })?;
    Ok(RegressorModel {
        mode: TrainingMode::Sqrl,
        config: cfg.clone(),
        featurizer,
        scaler,
        net: fitted.net,
        training_log: fitted.log,
        best_epoch: fitted.best_epoch,
    })
}

/// Trains f on absolute labels: f(g(x)) ≈ y. Validation holds out a seeded
/// `val_fraction` of molecules.
pub fn train_standard(
    features: &FeatureSet,
    y: &[f64],
    featurizer: Featurizer,
    cfg: &MlpConfig,
    val_fraction: f64,
) -> Result<RegressorModel, RegressorError> {
    cfg.validate()?;
    check_fraction(val_fraction)?;
    check_featurizer(&featurizer, features)?;
    if features.is_empty() {
        return Err(RegressorError::EmptyTraining);
    }
    if y.len() != features.len() {
        return Err(RegressorError::LengthMismatch {
            what: "features and labels",
            left: features.len(),
            right: y.len(),
        });
    }
    let all: Vec<usize> = (0..features.len()).collect();
    let held = sample_validation(&all, val_fraction, cfg.seed);
    let (mut train, mut val): (Vec<usize>, Vec<usize>) = all.iter().partition(|m| !held.contains(m));
    if train.is_empty() || val.is_empty() {
        train = all.clone();
        val.clear();
    }
    let scaler = cfg.standardize.then(|| Scaler::fit(features, &train));
    let fitted = fit(features.dim(), cfg, &train, &val, |m, row| {
        row.clear();
        row.extend_from_slice(features.row(m));
        if let Some(s) = &scaler {
            s.apply(row);
        }
        y[m]
    })?;
    Ok(RegressorModel {
        mode: TrainingMode::Standard,
        config: cfg.clone(),
        featurizer,
        scaler,
        net: fitted.net,
        training_log: fitted.log,
        best_epoch: fitted.best_epoch,
    })
}

/// Training molecules available as inference anchors.
#[derive(Debug, Clone, Copy)]
pub struct AnchorSet<'a> {
    pub metric: &'a DistanceMetric,
    pub points: &'a [MetricPoint],
    pub features: &'a FeatureSet,
    pub y: &'a [f64],
}

impl AnchorSet<'_> {
    fn check(&self) -> Result<(), RegressorError> {
        if self.points.is_empty() {
            return Err(RegressorError::EmptyTraining);
        }
        if self.points.len() != self.y.len() || self.features.len() != self.y.len() {
            return Err(RegressorError::LengthMismatch {
                what: "anchor points, features and labels",
                left: self.points.len().min(self.features.len()),
                right: self.y.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnchoredPrediction {
    pub value: f64,
    pub anchors: Vec<Neighbor>,
    /// `f(g_new − g_anchor)` per anchor.
    pub differences: Vec<f64>,
}

/// Mean over the `n` nearest anchors of `y_anchor + f(g_new − g_anchor)`.
pub fn predict_anchored(
    model: &RegressorModel,
    query_point: &MetricPoint,
    query_features: &[(u32, f64)],
    anchors: &AnchorSet<'_>,
    n: usize,
) -> Result<AnchoredPrediction, RegressorError> {
    model.require(TrainingMode::Sqrl)?;
    anchors.check()?;
    let nearest = nearest_neighbors(anchors.metric, query_point, anchors.points, n)?;
    let differences = nearest
        .iter()
        .map(|nb| model.relative(query_features, anchors.features.row(nb.index)))
        .collect::<Result<Vec<f64>, _>>()?;
    let terms: Vec<(f64, f64)> = nearest
        .iter()
        .zip(&differences)
        .map(|(nb, &f)| (anchors.y[nb.index], f))
        .collect();
    Ok(AnchoredPrediction {
        value: anchored_mean(&terms),
        anchors: nearest,
        differences,
    })
}

/// Mean of `y + f` over `(anchor label, predicted difference)` terms.
pub fn anchored_mean(terms: &[(f64, f64)]) -> f64 {
    terms.iter().map(|(y, f)| y + f).sum::<f64>() / terms.len() as f64
}

/// Mean label of the `k` nearest training molecules.
#[derive(Debug, Clone)]
pub struct KnnBaseline {
    k: usize,
    metric: DistanceMetric,
    points: Vec<MetricPoint>,
    y: Vec<f64>,
}

impl KnnBaseline {
    pub fn new(
        k: usize,
        metric: DistanceMetric,
        points: Vec<MetricPoint>,
        y: Vec<f64>,
    ) -> Result<KnnBaseline, RegressorError> {
        if points.is_empty() {
            return Err(RegressorError::EmptyTraining);
        }
        if points.len() != y.len() {
            return Err(RegressorError::LengthMismatch {
                what: "points and labels",
                left: points.len(),
                right: y.len(),
            });
        }
        if k == 0 || k > points.len() {
            return Err(RegressorError::InvalidConfig(format!(
                "k = {k} must lie in 1..={}",
                points.len()
            )));
        }
        Ok(KnnBaseline { k, metric, points, y })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn predict(&self, query: &MetricPoint) -> Result<f64, RegressorError> {
        let nn = nearest_neighbors(&self.metric, query, &self.points, self.k)?;
        Ok(nn.iter().map(|n| self.y[n.index]).sum::<f64>() / nn.len() as f64)
    }
}
