//! Flat `key = value` run configuration.
//!
//! Every key has a default (see [`RunConfig::default`] and `sqrl defaults`).
//! A config file is applied first, then `--set key=value` overrides in
//! order. `#` starts a comment; blank lines are ignored.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

use sqrl_core::distance::MetricKind;
use sqrl_core::evaluation::default_alpha_grid;
use sqrl_core::fingerprint::FingerprintConfig;
use sqrl_core::regressor::{InputMode, MlpConfig};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("key `{key}`: {reason}")]
    Value { key: String, reason: String },
    #[error("cannot read config {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureChoice {
    Morgan,
    Embedding,
}

impl FromStr for FeatureChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "morgan" => Ok(FeatureChoice::Morgan),
            "embedding" => Ok(FeatureChoice::Embedding),
            _ => Err(format!("unknown feature source `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSettings {
    pub mlp: MlpConfig,
    pub val_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub metric: MetricKind,
    /// Fingerprint used by the Tanimoto metrics.
    pub metric_fingerprint: FingerprintConfig,
    pub features: FeatureChoice,
    /// Fingerprint used as model input when `features = morgan`.
    pub feature_fingerprint: FingerprintConfig,
    pub embeddings: Option<PathBuf>,
    /// Divide embedding distances by the largest one within the dataset.
    pub embedding_normalize: bool,
    pub substructures: Option<PathBuf>,
    pub match_budget: Duration,
    /// `None` means an unbounded exact MCS search.
    pub mcs_budget: Option<Duration>,
    pub alpha: f64,
    pub alpha_grid: Vec<f64>,
    /// Bin edges for nearest-train-distance strata in reports.
    pub strata: Vec<f64>,
    pub n_anchors: usize,
    pub knn_k: usize,
    pub seed: u64,
    pub sqrl: ModelSettings,
    pub standard: ModelSettings,
    pub neg_log10: bool,
    pub max_pairs: usize,
    pub threshold_fraction: f64,
    pub task_id: Option<String>,
    pub output: PathBuf,
    pub workers: usize,
}

/// Hyper-parameters sized for single-core desk runs.
fn scaled_sqrl() -> MlpConfig {
    MlpConfig {
        hidden_sizes: vec![64, 32],
        dropout: 0.2,
        learning_rate: 1e-4,
        batch_size: 64,
        max_epochs: 60,
        patience: 20,
        seed: 0,
        max_samples_per_epoch: Some(4096),
        standardize: false,
        input_mode: InputMode::Difference,
    }
}

fn scaled_standard() -> MlpConfig {
    MlpConfig {
        hidden_sizes: vec![64, 32],
        dropout: 0.0,
        learning_rate: 3e-4,
        batch_size: 32,
        max_epochs: 500,
        patience: 30,
        seed: 0,
        max_samples_per_epoch: None,
        standardize: false,
        input_mode: InputMode::Difference,
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let fp = FingerprintConfig::default();
        RunConfig {
            metric: MetricKind::TanimotoBinary,
            metric_fingerprint: fp,
            features: FeatureChoice::Morgan,
            feature_fingerprint: fp,
            embeddings: None,
            embedding_normalize: false,
            substructures: None,
            match_budget: Duration::from_millis(1000),
            mcs_budget: Some(Duration::from_millis(1000)),
            alpha: 0.7,
            alpha_grid: default_alpha_grid(),
            strata: vec![0.0, 0.3, 0.7, 1.0],
            n_anchors: 1,
            knn_k: 1,
            seed: 0,
            sqrl: ModelSettings {
                mlp: scaled_sqrl(),
                val_fraction: 0.0,
            },
            standard: ModelSettings {
                mlp: scaled_standard(),
                val_fraction: 0.1,
            },
            neg_log10: false,
            max_pairs: sqrl_core::distance::DEFAULT_MAX_PAIRS,
            threshold_fraction: sqrl_core::pairing::DEFAULT_THRESHOLD_FRACTION,
            task_id: None,
            output: PathBuf::from("sqrl-out"),
            workers: 1,
        }
    }
}

/// Documented keys in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("preset", "scaled | full: resets both model blocks to a preset"),
    (
        "metric",
        "tanimoto_binary | tanimoto_count | substructure_jaccard | mcs | embedding_euclidean",
    ),
    ("metric.radius", "Morgan radius for the Tanimoto metrics"),
    ("metric.width", "folded fingerprint width for the Tanimoto metrics"),
    ("metric.chirality", "include chirality in metric fingerprints"),
    ("features", "morgan | embedding"),
    ("features.radius", "Morgan radius of model inputs"),
    ("features.width", "fingerprint width of model inputs"),
    ("features.counted", "count fingerprint (true) or 0/1 bits (false)"),
    ("features.chirality", "include chirality in model inputs"),
    (
        "embeddings",
        "embedding table path (required by embedding metric or features)",
    ),
    (
        "embedding_normalize",
        "scale embedding distances by the dataset maximum",
    ),
    ("substructures", "substructure library path (default: built-in library)"),
    ("substructure_budget_ms", "time budget per substructure count"),
    ("mcs_budget_ms", "time budget per MCS search; 0 = unbounded"),
    ("alpha", "pair distance threshold"),
    ("alpha_grid", "comma-separated ascending sweep grid"),
    (
        "strata",
        "comma-separated ascending distance bin edges for report strata",
    ),
    ("n_anchors", "nearest training anchors per SQRL prediction"),
    ("knn_k", "neighbors averaged by the k-NN baseline"),
    ("seed", "seed for training, sampling and synthesis"),
    ("sqrl.hidden", "comma-separated hidden layer sizes"),
    ("sqrl.dropout", "dropout rate in [0, 1)"),
    ("sqrl.lr", "Adam learning rate"),
    ("sqrl.batch", "minibatch size"),
    ("sqrl.epochs", "maximum epochs"),
    ("sqrl.patience", "early-stopping patience in epochs"),
    (
        "sqrl.samples_per_epoch",
        "pairs visited per epoch; `all` for every pair",
    ),
    ("sqrl.standardize", "scale inputs by 1/std"),
    ("sqrl.input", "difference | concat"),
    ("sqrl.val_fraction", "share of molecules held out for early stopping"),
    ("standard.hidden", "as sqrl.hidden"),
    ("standard.dropout", "as sqrl.dropout"),
    ("standard.lr", "as sqrl.lr"),
    ("standard.batch", "as sqrl.batch"),
    ("standard.epochs", "as sqrl.epochs"),
    ("standard.patience", "as sqrl.patience"),
    ("standard.samples_per_epoch", "as sqrl.samples_per_epoch"),
    ("standard.standardize", "as sqrl.standardize"),
    ("standard.val_fraction", "as sqrl.val_fraction"),
    ("neg_log10", "replace labels by -log10(y) on ingest"),
    ("max_pairs", "pair sample size for distance statistics"),
    ("threshold_fraction", "fraction of the mean distance suggested as alpha"),
    ("task_id", "report task name (default: dataset file stem)"),
    ("output", "output directory"),
    ("workers", "worker threads for sweep grid points"),
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Value {
        key: key.into(),
        reason: format!("cannot parse `{value}`"),
    })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.into(),
        reason: reason.into(),
    }
}

fn fmt_list<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn millis(d: Option<Duration>) -> String {
    d.map_or_else(|| "0".into(), |d| d.as_millis().to_string())
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        if let Some((block, field)) = key.split_once('.') {
            let settings = match block {
                "sqrl" => Some(&mut self.sqrl),
                "standard" => Some(&mut self.standard),
                _ => None,
            };
            if let Some(s) = settings {
                let m = &mut s.mlp;
                match field {
                    "hidden" => m.hidden_sizes = parse_list(key, value)?,
                    "dropout" => m.dropout = parse(key, value)?,
                    "lr" => m.learning_rate = parse(key, value)?,
                    "batch" => m.batch_size = parse(key, value)?,
                    "epochs" => m.max_epochs = parse(key, value)?,
                    "patience" => m.patience = parse(key, value)?,
                    "samples_per_epoch" => {
                        m.max_samples_per_epoch = if value == "all" { None } else { Some(parse(key, value)?) }
                    }
                    "standardize" => m.standardize = parse(key, value)?,
                    "input" if block == "sqrl" => {
                        m.input_mode = match value {
                            "difference" => InputMode::Difference,
                            "concat" => InputMode::Concat,
                            _ => return Err(bad(key, "expected difference or concat")),
                        }
                    }
                    "val_fraction" => s.val_fraction = parse(key, value)?,
                    _ => return Err(ConfigError::UnknownKey(key.into())),
                }
                return Ok(());
            }
        }
        let path = |v: &str| if v.is_empty() { None } else { Some(PathBuf::from(v)) };
        match key {
            "preset" => match value {
                "scaled" => {
                    self.sqrl.mlp = scaled_sqrl();
                    self.standard.mlp = scaled_standard();
                }
                "full" => {
                    self.sqrl.mlp = MlpConfig::full_sqrl();
                    self.standard.mlp = MlpConfig::full_standard();
                }
                _ => return Err(bad(key, "expected scaled or full")),
            },
            "metric" => {
                self.metric = value
                    .parse()
                    .map_err(|e: sqrl_core::distance::DistanceError| bad(key, e.to_string()))?
            }
            "metric.radius" => self.metric_fingerprint.radius = parse(key, value)?,
            "metric.width" => self.metric_fingerprint.width = parse(key, value)?,
            "metric.chirality" => self.metric_fingerprint.use_chirality = parse(key, value)?,
            "features" => self.features = value.parse().map_err(|e| bad(key, e))?,
            "features.radius" => self.feature_fingerprint.radius = parse(key, value)?,
            "features.width" => self.feature_fingerprint.width = parse(key, value)?,
            "features.counted" => self.feature_fingerprint.counted = parse(key, value)?,
            "features.chirality" => self.feature_fingerprint.use_chirality = parse(key, value)?,
            "embeddings" => self.embeddings = path(value),
            "embedding_normalize" => self.embedding_normalize = parse(key, value)?,
            "substructures" => self.substructures = path(value),
            "substructure_budget_ms" => self.match_budget = Duration::from_millis(parse(key, value)?),
            "mcs_budget_ms" => {
                let ms: u64 = parse(key, value)?;
                self.mcs_budget = (ms > 0).then(|| Duration::from_millis(ms));
            }
            "alpha" => self.alpha = parse(key, value)?,
            "alpha_grid" => self.alpha_grid = parse_list(key, value)?,
            "strata" => self.strata = parse_list(key, value)?,
            "n_anchors" => self.n_anchors = parse(key, value)?,
            "knn_k" => self.knn_k = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "neg_log10" => self.neg_log10 = parse(key, value)?,
            "max_pairs" => self.max_pairs = parse(key, value)?,
            "threshold_fraction" => self.threshold_fraction = parse(key, value)?,
            "task_id" => self.task_id = (!value.is_empty()).then(|| value.to_string()),
            "output" => self.output = PathBuf::from(value),
            "workers" => self.workers = parse(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: k + 1 })?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        self.apply_text(&text)
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| bad(kv, "override must be key=value"))?;
        self.set(key.trim(), value)
    }

    /// Cross-field checks and existence of referenced files.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(bad("alpha", "must be positive"));
        }
        if self.alpha_grid.is_empty()
            || self.alpha_grid.iter().any(|a| !(*a > 0.0))
            || self.alpha_grid.windows(2).any(|w| !(w[0] < w[1]))
        {
            return Err(bad("alpha_grid", "must be positive and strictly ascending"));
        }
        if self.strata.len() < 2 || self.strata.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(bad("strata", "need at least two strictly ascending edges"));
        }
        if self.n_anchors == 0 {
            return Err(bad("n_anchors", "must be at least 1"));
        }
        if self.knn_k == 0 {
            return Err(bad("knn_k", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(bad("workers", "must be at least 1"));
        }
        if self.max_pairs == 0 {
            return Err(bad("max_pairs", "must be at least 1"));
        }
        for (key, fp) in [
            ("metric", &self.metric_fingerprint),
            ("features", &self.feature_fingerprint),
        ] {
            fp.validate().map_err(|e| bad(key, e.to_string()))?;
        }
        for (name, s) in [("sqrl", &self.sqrl), ("standard", &self.standard)] {
            s.mlp.validate().map_err(|e| bad(name, e.to_string()))?;
            if !(0.0..1.0).contains(&s.val_fraction) {
                return Err(bad(&format!("{name}.val_fraction"), "must lie in [0, 1)"));
            }
        }
        let needs_table = self.metric == MetricKind::EmbeddingEuclidean || self.features == FeatureChoice::Embedding;
        if needs_table && self.embeddings.is_none() {
            return Err(bad("embeddings", "required by the embedding metric or features"));
        }
        for (key, p) in [("embeddings", &self.embeddings), ("substructures", &self.substructures)] {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(bad(key, format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Model config for `settings` with the run seed applied.
    pub fn seeded(&self, settings: &ModelSettings) -> MlpConfig {
        MlpConfig {
            seed: self.seed,
            ..settings.mlp.clone()
        }
    }

    /// Canonical `key = value` listing; semantically identical configs give
    /// identical text.
    pub fn to_map(&self) -> BTreeMap<&'static str, String> {
        let mut m = BTreeMap::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        m.insert("metric", self.metric.name().to_string());
        m.insert("metric.radius", self.metric_fingerprint.radius.to_string());
        m.insert("metric.width", self.metric_fingerprint.width.to_string());
        m.insert("metric.chirality", self.metric_fingerprint.use_chirality.to_string());
        m.insert(
            "features",
            match self.features {
                FeatureChoice::Morgan => "morgan",
                FeatureChoice::Embedding => "embedding",
            }
            .to_string(),
        );
        m.insert("features.radius", self.feature_fingerprint.radius.to_string());
        m.insert("features.width", self.feature_fingerprint.width.to_string());
        m.insert("features.counted", self.feature_fingerprint.counted.to_string());
        m.insert("features.chirality", self.feature_fingerprint.use_chirality.to_string());
        m.insert("embeddings", path(&self.embeddings));
        m.insert("embedding_normalize", self.embedding_normalize.to_string());
        m.insert("substructures", path(&self.substructures));
        m.insert("substructure_budget_ms", self.match_budget.as_millis().to_string());
        m.insert("mcs_budget_ms", millis(self.mcs_budget));
        m.insert("alpha", self.alpha.to_string());
        m.insert("alpha_grid", fmt_list(&self.alpha_grid));
        m.insert("strata", fmt_list(&self.strata));
        m.insert("n_anchors", self.n_anchors.to_string());
        m.insert("knn_k", self.knn_k.to_string());
        m.insert("seed", self.seed.to_string());
        for (name, s) in [("sqrl", &self.sqrl), ("standard", &self.standard)] {
            let c = &s.mlp;
            let key = |f: &str| -> &'static str {
                KEYS.iter()
                    .map(|(k, _)| *k)
                    .find(|k| *k == format!("{name}.{f}"))
                    .expect("documented key")
            };
            m.insert(key("hidden"), fmt_list(&c.hidden_sizes));
            m.insert(key("dropout"), c.dropout.to_string());
            m.insert(key("lr"), c.learning_rate.to_string());
            m.insert(key("batch"), c.batch_size.to_string());
            m.insert(key("epochs"), c.max_epochs.to_string());
            m.insert(key("patience"), c.patience.to_string());
            m.insert(
                key("samples_per_epoch"),
                c.max_samples_per_epoch.map_or_else(|| "all".into(), |n| n.to_string()),
            );
            m.insert(key("standardize"), c.standardize.to_string());
            m.insert(key("val_fraction"), s.val_fraction.to_string());
        }
        m.insert(
            "sqrl.input",
            match self.sqrl.mlp.input_mode {
                InputMode::Difference => "difference",
                InputMode::Concat => "concat",
            }
            .to_string(),
        );
        m.insert("neg_log10", self.neg_log10.to_string());
        m.insert("max_pairs", self.max_pairs.to_string());
        m.insert("threshold_fraction", self.threshold_fraction.to_string());
        m.insert("task_id", self.task_id.clone().unwrap_or_default());
        m.insert("output", self.output.display().to_string());
        m.insert("workers", self.workers.to_string());
        m
    }

    pub fn to_text(&self) -> String {
        self.to_map().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Hash over the settings that affect numeric results (`output` and
    /// `workers` excluded).
    pub fn hash(&self) -> String {
        let text: String = self
            .to_map()
            .iter()
            .filter(|(k, _)| !matches!(**k, "output" | "workers"))
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect();
        crate::dataset::sha256_hex(text.as_bytes())
    }
}
