//! Metrics and experiment designs: MAE, Spearman ρ, cliff subsets,
//! threshold sweeps and distance-to-train stratification.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::{nearest_neighbors, DistanceError, MetricPoint, Neighbor};
use crate::pairing::{pairs_from_distances, CondensedDistances, PairingError};
use crate::regressor::{
    anchored_mean, train_sqrl, AnchorSet, FeatureSet, Featurizer, KnnBaseline, MlpConfig, RegressorError,
    RegressorModel,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {0} true values vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("prediction failed for `{id}`: {source}")]
    Prediction { id: String, source: RegressorError },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Pairing(#[from] PairingError),
    #[error(transparent)]
    Regressor(#[from] RegressorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn check_lengths(a: &[f64], b: &[f64], min: usize) -> Result<(), EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < min {
        return Err(EvalError::TooFew {
            needed: min,
            got: a.len(),
        });
    }
    Ok(())
}

pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64, EvalError> {
    check_lengths(y_true, y_pred, 1)?;
    Ok(y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / y_true.len() as f64)
}

/// 1-based ranks with ties sharing the average of their positions.
pub fn fractional_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman ρ: Pearson correlation of average-tie ranks. `Ok(None)` marks
/// an undefined value (constant ranks on either side).
pub fn spearman(y_true: &[f64], y_pred: &[f64]) -> Result<Option<f64>, EvalError> {
    check_lengths(y_true, y_pred, 2)?;
    Ok(pearson(&fractional_ranks(y_true), &fractional_ranks(y_pred)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Standard,
    Sqrl,
    Knn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Standard => "standard",
            Method::Sqrl => "sqrl",
            Method::Knn => "knn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoleculePrediction {
    pub id: String,
    pub y_true: f64,
    pub y_pred: f64,
    pub dist_to_nearest_train: f64,
    pub is_cliff: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task_id: String,
    pub method: Method,
    pub mae: f64,
    /// `null` when undefined.
    pub spearman_rho: Option<f64>,
    pub n_test: usize,
    pub n_cliff: usize,
    /// Present only with at least two cliff rows.
    pub cliff_mae: Option<f64>,
    pub cliff_spearman: Option<f64>,
    pub per_molecule: Vec<MoleculePrediction>,
}

impl EvalReport {
    pub fn from_predictions(
        task_id: &str,
        method: Method,
        per_molecule: Vec<MoleculePrediction>,
    ) -> Result<EvalReport, EvalError> {
        let (t, p): (Vec<f64>, Vec<f64>) = per_molecule.iter().map(|m| (m.y_true, m.y_pred)).unzip();
        let mae_all = mae(&t, &p)?;
        let rho = if t.len() >= 2 { spearman(&t, &p)? } else { None };
        let (ct, cp): (Vec<f64>, Vec<f64>) = per_molecule
            .iter()
            .filter(|m| m.is_cliff)
            .map(|m| (m.y_true, m.y_pred))
            .unzip();
        let (cliff_mae, cliff_spearman) = if ct.len() >= 2 {
            (Some(mae(&ct, &cp)?), spearman(&ct, &cp)?)
        } else {
            (None, None)
        };
        Ok(EvalReport {
            task_id: task_id.to_string(),
            method,
            mae: mae_all,
            spearman_rho: rho,
            n_test: per_molecule.len(),
            n_cliff: ct.len(),
            cliff_mae,
            cliff_spearman,
            per_molecule,
        })
    }

    pub fn y_true(&self) -> Vec<f64> {
        self.per_molecule.iter().map(|m| m.y_true).collect()
    }

    pub fn y_pred(&self) -> Vec<f64> {
        self.per_molecule.iter().map(|m| m.y_pred).collect()
    }
}

/// Held-out molecules with everything needed to score them.
#[derive(Debug, Clone, Copy)]
pub struct TestSet<'a> {
    pub ids: &'a [String],
    pub points: &'a [MetricPoint],
    pub features: &'a FeatureSet,
    pub y: &'a [f64],
    pub is_cliff: &'a [bool],
}

impl TestSet<'_> {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    fn check(&self) -> Result<(), EvalError> {
        let n = self.ids.len();
        if n == 0 {
            return Err(EvalError::TooFew { needed: 1, got: 0 });
        }
        if [
            self.points.len(),
            self.features.len(),
            self.y.len(),
            self.is_cliff.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(EvalError::InvalidArgument(
                "test ids, points, features, labels and cliff flags differ in length".into(),
            ));
        }
        Ok(())
    }
}

pub enum Predictor<'a> {
    Standard(&'a RegressorModel),
    /// Anchored SQRL inference over the `n` nearest training molecules.
    Sqrl {
        model: &'a RegressorModel,
        n: usize,
    },
    Knn(&'a KnnBaseline),
}

impl Predictor<'_> {
    pub fn method(&self) -> Method {
        match self {
            Predictor::Standard(_) => Method::Standard,
            Predictor::Sqrl { .. } => Method::Sqrl,
            Predictor::Knn(_) => Method::Knn,
        }
    }
}

/// The `n` nearest anchors of every test molecule, ascending by distance.
pub fn test_neighbors(test: &TestSet<'_>, anchors: &AnchorSet<'_>, n: usize) -> Result<Vec<Vec<Neighbor>>, EvalError> {
    test.points
        .iter()
        .map(|p| Ok(nearest_neighbors(anchors.metric, p, anchors.points, n)?))
        .collect()
}

/// Scores `predictor` on `test`, using precomputed neighbor lists
/// (at least one neighbor per molecule, and at least `n` for SQRL).
pub fn evaluate_with_neighbors(
    task_id: &str,
    predictor: &Predictor<'_>,
    test: &TestSet<'_>,
    anchors: &AnchorSet<'_>,
    neighbors: &[Vec<Neighbor>],
) -> Result<EvalReport, EvalError> {
    test.check()?;
    if neighbors.len() != test.len() || neighbors.iter().any(Vec::is_empty) {
        return Err(EvalError::InvalidArgument(
            "one neighbor list per test molecule required".into(),
        ));
    }
    let mut rows = Vec::with_capacity(test.len());
    for k in 0..test.len() {
        let id = &test.ids[k];
        let fail = |source| EvalError::Prediction { id: id.clone(), source };
        let y_pred = match predictor {
            Predictor::Standard(model) => model.predict_standard(test.features.row(k)).map_err(fail)?,
            Predictor::Sqrl { model, n } => {
                let nn = &neighbors[k];
                if nn.len() < *n {
                    return Err(EvalError::InvalidArgument(format!(
                        "{} neighbors cached, {n} anchors requested",
                        nn.len()
                    )));
                }
                let mut terms = Vec::with_capacity(*n);
                for a in &nn[..*n] {
                    let f = model
                        .relative(test.features.row(k), anchors.features.row(a.index))
                        .map_err(fail)?;
                    terms.push((anchors.y[a.index], f));
                }
                anchored_mean(&terms)
            }
            Predictor::Knn(knn) => knn.predict(&test.points[k]).map_err(fail)?,
        };
        if !y_pred.is_finite() {
            return Err(fail(RegressorError::Diverged { epoch: 0, loss: y_pred }));
        }
        rows.push(MoleculePrediction {
            id: id.clone(),
            y_true: test.y[k],
            y_pred,
            dist_to_nearest_train: neighbors[k][0].distance,
            is_cliff: test.is_cliff[k],
        });
    }
    EvalReport::from_predictions(task_id, predictor.method(), rows)
}

/// Scores `predictor` on `test`; SQRL uses `n` anchors.
pub fn evaluate_task(
    task_id: &str,
    predictor: &Predictor<'_>,
    test: &TestSet<'_>,
    anchors: &AnchorSet<'_>,
) -> Result<EvalReport, EvalError> {
    test.check()?;
    let n = match predictor {
        Predictor::Sqrl { n, .. } => *n,
        _ => 1,
    };
    let neighbors = test_neighbors(test, anchors, n)?;
    evaluate_with_neighbors(task_id, predictor, test, anchors, &neighbors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub mae: Option<f64>,
    /// Omitted below three points or when undefined.
    pub spearman: Option<f64>,
}

/// Buckets test molecules by distance to their nearest training molecule.
/// Bins are `[lo, hi)` except the last, which is closed.
pub fn stratify_by_distance(report: &EvalReport, bin_edges: &[f64]) -> Result<Vec<Stratum>, EvalError> {
    if bin_edges.len() < 2 || bin_edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EvalError::InvalidArgument(
            "bin edges must be at least two strictly ascending values".into(),
        ));
    }
    let bins = bin_edges.len() - 1;
    let mut out = Vec::with_capacity(bins);
    for b in 0..bins {
        let (lo, hi) = (bin_edges[b], bin_edges[b + 1]);
        let last = b == bins - 1;
        let (t, p): (Vec<f64>, Vec<f64>) = report
            .per_molecule
            .iter()
            .filter(|m| {
                let d = m.dist_to_nearest_train;
                d >= lo && (d < hi || (last && d == hi))
            })
            .map(|m| (m.y_true, m.y_pred))
            .unzip();
        out.push(Stratum {
            lo,
            hi,
            n: t.len(),
            mae: if t.is_empty() { None } else { Some(mae(&t, &p)?) },
            spearman: if t.len() >= 3 { spearman(&t, &p)? } else { None },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub tasks: usize,
    pub mae_mean: f64,
    /// Sample standard deviation (n − 1); `None` for a single task.
    pub mae_std: Option<f64>,
    /// Tasks with a defined ρ.
    pub rho_tasks: usize,
    pub rho_mean: Option<f64>,
    pub rho_std: Option<f64>,
    pub std_kind: String,
}

fn mean_and_sample_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std =
        (values.len() >= 2).then(|| (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), std)
}

/// Mean and sample standard deviation of per-task MAE and ρ. Tasks with an
/// undefined ρ are left out of the ρ statistics.
pub fn aggregate(reports: &[EvalReport]) -> Result<Aggregate, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::TooFew { needed: 1, got: 0 });
    }
    let maes: Vec<f64> = reports.iter().map(|r| r.mae).collect();
    let rhos: Vec<f64> = reports.iter().filter_map(|r| r.spearman_rho).collect();
    let (mae_mean, mae_std) = mean_and_sample_std(&maes);
    let (rho_mean, rho_std) = mean_and_sample_std(&rhos);
    Ok(Aggregate {
        tasks: reports.len(),
        mae_mean: mae_mean.expect("non-empty"),
        mae_std,
        rho_tasks: rhos.len(),
        rho_mean,
        rho_std,
        std_kind: "sample".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub pair_count: usize,
    /// `None` when the grid point was skipped for lack of pairs.
    pub mae: Option<f64>,
    pub spearman: Option<f64>,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub metric_kind: String,
    pub grid: Vec<SweepPoint>,
}

fn na(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

impl SweepResult {
    /// `alpha,pair_count,mae,spearman`; skipped or undefined values are `NA`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "alpha,pair_count,mae,spearman")?;
        for p in &self.grid {
            writeln!(out, "{},{},{},{}", p.alpha, p.pair_count, na(p.mae), na(p.spearman))?;
        }
        Ok(())
    }
}

/// Default α grid: 0.1, 0.2, …, 1.0.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=10).map(|k| k as f64 / 10.0).collect()
}

/// Inputs shared by every grid point of a sweep.
pub struct SweepInputs<'a> {
    pub anchors: AnchorSet<'a>,
    /// Pairwise distances among the anchors.
    pub distances: &'a CondensedDistances,
    pub test: TestSet<'a>,
    pub featurizer: Featurizer,
    pub config: MlpConfig,
    pub val_fraction: f64,
    pub n_anchors: usize,
}

/// Trains and scores one SQRL model at `alpha`. Returns the point and, when
/// trained, the report.
pub fn sweep_point(
    inputs: &SweepInputs<'_>,
    neighbors: &[Vec<Neighbor>],
    alpha: f64,
) -> Result<(SweepPoint, Option<EvalReport>), EvalError> {
    let pairs = pairs_from_distances(
        inputs.distances,
        inputs.anchors.y,
        alpha,
        &inputs.anchors.metric.descriptor(),
    )?;
    if pairs.is_empty() {
        return Ok((
            SweepPoint {
                alpha,
                pair_count: 0,
                mae: None,
                spearman: None,
                skipped: true,
            },
            None,
        ));
    }
    let model = train_sqrl(
        &pairs,
        inputs.anchors.features,
        inputs.featurizer.clone(),
        &inputs.config,
        inputs.val_fraction,
    )?;
    let predictor = Predictor::Sqrl {
        model: &model,
        n: inputs.n_anchors,
    };
    let report = evaluate_with_neighbors(
        &format!("alpha={alpha}"),
        &predictor,
        &inputs.test,
        &inputs.anchors,
        neighbors,
    )?;
    Ok((
        SweepPoint {
            alpha,
            pair_count: pairs.len(),
            mae: Some(report.mae),
            spearman: report.spearman_rho,
            skipped: false,
        },
        Some(report),
    ))
}

/// Trains a fresh SQRL model at every α of an ascending grid and scores it.
pub fn threshold_sweep(
    inputs: &SweepInputs<'_>,
    alpha_grid: &[f64],
    metric_kind: &str,
) -> Result<SweepResult, EvalError> {
    if alpha_grid.is_empty() || alpha_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(EvalError::InvalidArgument(
            "alpha grid must be non-empty and ascending".into(),
        ));
    }
    let neighbors = test_neighbors(&inputs.test, &inputs.anchors, inputs.n_anchors)?;
    let grid = alpha_grid
        .iter()
        .map(|&a| sweep_point(inputs, &neighbors, a).map(|(p, _)| p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult {
        metric_kind: metric_kind.to_string(),
        grid,
    })
}
