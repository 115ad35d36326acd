//! Pipeline commands. Each `compute_*` function is pure; the command wrappers
//! add ingestion, artifact writing and run metadata.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use sqrl_core::distance::{pairwise_stats, DistStats, DistanceMetric, EmbeddingTable, MetricKind, MoleculeRecord};
use sqrl_core::evaluation::{
    evaluate_task, stratify_by_distance, sweep_point, test_neighbors, EvalReport, Method, Predictor, Stratum,
    SweepInputs, SweepResult,
};
use sqrl_core::fingerprint::{default_library, MatchBudget, SubstructureLibrary};
use sqrl_core::pairing::{pair_budget, pairs_from_distances, suggest_threshold, CondensedDistances, RelativePairSet};
use sqrl_core::regressor::{
    predict_anchored, train_sqrl, train_standard, Featurizer, KnnBaseline, RegressorModel, TrainingMode,
};

use crate::artifacts::{to_json, IngestSummary, Provenance, Run};
use crate::config::{FeatureChoice, RunConfig};
use crate::dataset::{ingest, DatasetManifest, IngestOptions, Rejected, Split};
use crate::error::CliError;
use crate::synth::{self, SynthConfig};
use crate::task::{FeatureSource, Task};

/// What a command produced.
#[derive(Debug)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    /// Human-readable lines for stdout.
    pub summary: String,
}

pub fn build_metric(cfg: &RunConfig) -> Result<DistanceMetric, CliError> {
    let metric = match cfg.metric {
        MetricKind::TanimotoBinary => DistanceMetric::tanimoto_binary(cfg.metric_fingerprint),
        MetricKind::TanimotoCount => DistanceMetric::tanimoto_count(cfg.metric_fingerprint),
        MetricKind::SubstructureJaccard => {
            let library = match &cfg.substructures {
                Some(p) => SubstructureLibrary::from_file(p).map_err(CliError::data)?,
                None => default_library(),
            };
            DistanceMetric::substructure_jaccard(Arc::new(library), MatchBudget { time: cfg.match_budget })
        }
        MetricKind::Mcs => Ok(DistanceMetric::mcs(cfg.mcs_budget)),
        MetricKind::EmbeddingEuclidean => Ok(DistanceMetric::embedding_euclidean(load_embeddings(cfg)?)),
    };
    metric.map_err(|e| CliError::Config(e.to_string()))
}

fn load_embeddings(cfg: &RunConfig) -> Result<Arc<EmbeddingTable>, CliError> {
    let path = cfg
        .embeddings
        .as_ref()
        .ok_or_else(|| CliError::Config("`embeddings` is required".into()))?;
    EmbeddingTable::from_file(path).map(Arc::new).map_err(CliError::data)
}

fn embedding_source(cfg: &RunConfig) -> String {
    cfg.embeddings
        .as_ref()
        .and_then(|p| p.file_name())
        .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

pub fn feature_source(cfg: &RunConfig) -> Result<FeatureSource, CliError> {
    Ok(match cfg.features {
        FeatureChoice::Morgan => FeatureSource::Morgan(cfg.feature_fingerprint),
        FeatureChoice::Embedding => FeatureSource::Embedding {
            table: load_embeddings(cfg)?,
            source: embedding_source(cfg),
        },
    })
}

/// Feature source matching a trained model's featurizer.
fn source_for_model(cfg: &RunConfig, model: &RegressorModel) -> Result<FeatureSource, CliError> {
    match &model.featurizer {
        Featurizer::Morgan { config } => Ok(FeatureSource::Morgan(*config)),
        Featurizer::Embedding { dimension, .. } => {
            let table = load_embeddings(cfg)?;
            if table.dimension() != *dimension {
                return Err(CliError::Config(format!(
                    "model expects {dimension}-dimensional embeddings, table has {}",
                    table.dimension()
                )));
            }
            Ok(FeatureSource::Embedding {
                table,
                source: embedding_source(cfg),
            })
        }
    }
}

pub fn load_manifest(cfg: &RunConfig, data: &Path) -> Result<DatasetManifest, CliError> {
    let manifest = ingest(
        data,
        IngestOptions {
            neg_log10: cfg.neg_log10,
        },
    )?;
    log::info!(
        "{}: {} accepted, {} rejected of {} rows",
        manifest.source,
        manifest.rows.len(),
        manifest.rejected.len(),
        manifest.total_rows()
    );
    Ok(manifest)
}

pub fn task_id(cfg: &RunConfig, data: &Path) -> String {
    cfg.task_id.clone().unwrap_or_else(|| {
        data.file_stem()
            .map_or_else(|| "task".into(), |s| s.to_string_lossy().into_owned())
    })
}

fn start_run<'a>(command: &'static str, cfg: &'a RunConfig, manifest: &DatasetManifest, data: &Path) -> Run<'a> {
    let mut run = Run::new(command, cfg, Provenance::new(cfg, &manifest.hash), &manifest.source);
    run.inputs.push(data.to_path_buf());
    run.inputs.extend(cfg.embeddings.iter().cloned());
    run.inputs.extend(cfg.substructures.iter().cloned());
    run.ingest = Some(IngestSummary {
        total: manifest.total_rows(),
        accepted: manifest.rows.len(),
        rejected: manifest.rejected.clone(),
    });
    run
}

fn ingest_line(m: &DatasetManifest) -> String {
    format!(
        "ingested {} rows: {} accepted ({} train, {} test), {} rejected\n",
        m.total_rows(),
        m.rows.len(),
        m.count(Split::Train),
        m.count(Split::Test),
        m.rejected.len()
    )
}

fn rejected_csv(prov: &Provenance, rejected: &[Rejected]) -> Result<Vec<u8>, CliError> {
    let mut out = prov.comment().into_bytes();
    let mut w = csv::Writer::from_writer(&mut out);
    w.write_record(["row", "reason"]).map_err(CliError::compute)?;
    for r in rejected {
        w.write_record([r.row.to_string(), r.reason.clone()])
            .map_err(CliError::compute)?;
    }
    w.flush().map_err(CliError::compute)?;
    drop(w);
    Ok(out)
}

fn deliver(run: Run<'_>, started: Instant, summary: String, mut artifacts: Vec<PathBuf>) -> Result<Outcome, CliError> {
    artifacts.push(run.finish(started.elapsed())?);
    Ok(Outcome { artifacts, summary })
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(CliError::compute)
}

pub fn synthesize(cfg: &RunConfig, synth_cfg: &SynthConfig, out: &Path) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let rows = synth::synthesize(synth_cfg);
    let mut bytes = Vec::new();
    synth::write_csv(&rows, &mut bytes).map_err(CliError::compute)?;
    let hash = crate::dataset::sha256_hex(&bytes);
    let mut run = Run::new(
        "synthesize",
        cfg,
        Provenance::new(cfg, &hash),
        &out.display().to_string(),
    );
    let path = run.write_path(out, &bytes)?;
    let n_test = rows.iter().filter(|r| r.test).count();
    let n_cliff = rows.iter().filter(|r| r.is_cliff).count();
    let summary = format!(
        "wrote {} molecules ({} train, {} test, {} cliff)\n",
        rows.len(),
        rows.len() - n_test,
        n_test,
        n_cliff
    );
    deliver(run, started, summary, vec![path])
}

fn write_sparse(out: &mut String, row: &[(u32, f64)]) {
    for (k, (i, v)) in row.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{i}:{v}");
    }
}

/// Sparse feature rows: `id,split,features` with `index:value` entries
/// separated by spaces.
pub fn featurize(cfg: &RunConfig, data: &Path) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let manifest = load_manifest(cfg, data)?;
    let source = feature_source(cfg)?;
    let records: Vec<MoleculeRecord> = manifest
        .rows
        .iter()
        .map(|r| MoleculeRecord {
            id: r.id.clone(),
            graph: Arc::clone(&r.graph),
        })
        .collect();
    let features = source.features(&records)?;
    let mut run = start_run("featurize", cfg, &manifest, data);
    let featurizer = serde_json::to_string(&source.featurizer()).map_err(CliError::compute)?;
    let mut text = run.provenance.comment();
    let _ = writeln!(text, "# featurizer={featurizer} dim={}", features.dim());
    text.push_str("id,split,features\n");
    for (k, r) in manifest.rows.iter().enumerate() {
        let _ = write!(text, "{},{},", r.id, r.split);
        write_sparse(&mut text, features.row(k));
        text.push('\n');
    }
    let mut paths = vec![run.write("features.csv", text.as_bytes())?];
    paths.push(run.write("rejected.csv", &rejected_csv(&run.provenance, &manifest.rejected)?)?);
    deliver(run, started, ingest_line(&manifest), paths)
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub metric: String,
    pub n_train: usize,
    pub stats: DistStats,
    pub alpha: f64,
    /// Expected ordered pairs at `alpha`.
    pub expected_pairs: f64,
    pub suggested_alpha: Option<f64>,
    pub suggestion_error: Option<String>,
}

pub fn compute_stats(cfg: &RunConfig, task: &Task) -> Result<StatsReport, CliError> {
    let stats = pairwise_stats(&task.metric, &task.train.points, cfg.max_pairs, cfg.seed).map_err(CliError::compute)?;
    let suggested = suggest_threshold(&stats, cfg.threshold_fraction);
    Ok(StatsReport {
        metric: task.metric.descriptor(),
        n_train: task.train.points.len(),
        expected_pairs: pair_budget(task.train.points.len(), cfg.alpha, &stats),
        alpha: cfg.alpha,
        suggested_alpha: suggested.as_ref().ok().copied(),
        suggestion_error: suggested.err().map(|e| e.to_string()),
        stats,
    })
}

pub fn prepare(cfg: &RunConfig, data: &Path) -> Result<(DatasetManifest, Task), CliError> {
    let manifest = load_manifest(cfg, data)?;
    let mut metric = build_metric(cfg)?;
    if cfg.embedding_normalize {
        if let DistanceMetric::EmbeddingEuclidean { table, .. } = &metric {
            let ids: Vec<&str> = manifest.rows.iter().map(|r| r.id.as_str()).collect();
            metric =
                DistanceMetric::embedding_euclidean_max_normalized(Arc::clone(table), &ids).map_err(CliError::data)?;
        }
    }
    let task = Task::prepare(&manifest, metric, &feature_source(cfg)?)?;
    Ok((manifest, task))
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

pub fn stats(cfg: &RunConfig, data: &Path) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (manifest, task) = prepare(cfg, data)?;
    let report = compute_stats(cfg, &task)?;
    let mut run = start_run("stats", cfg, &manifest, data);
    let bytes = to_json(&Stamped {
        provenance: &run.provenance,
        body: &report,
    })?;
    let path = run.write("stats.json", &bytes)?;
    let mut summary = ingest_line(&manifest);
    let _ = writeln!(
        summary,
        "{}: mean {:.4} std {:.4} over {} pairs; ~{:.0} ordered pairs at alpha {}",
        report.metric, report.stats.mean, report.stats.std, report.stats.pairs, report.expected_pairs, cfg.alpha
    );
    match (&report.suggested_alpha, &report.suggestion_error) {
        (Some(a), _) => _ = writeln!(summary, "suggested alpha {a:.4}"),
        (None, Some(e)) => _ = writeln!(summary, "no suggested alpha: {e}"),
        _ => {}
    }
    deliver(run, started, summary, vec![path])
}

pub fn compute_pairs(cfg: &RunConfig, task: &Task) -> Result<(CondensedDistances, RelativePairSet), CliError> {
    let distances = CondensedDistances::compute(&task.metric, &task.train.points).map_err(CliError::compute)?;
    let pairs = pairs_from_distances(&distances, &task.train.y, cfg.alpha, &task.metric.descriptor())
        .map_err(CliError::compute)?;
    Ok((distances, pairs))
}

pub fn pairs(cfg: &RunConfig, data: &Path) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (manifest, task) = prepare(cfg, data)?;
    let (_, pairs) = compute_pairs(cfg, &task)?;
    let mut run = start_run("pairs", cfg, &manifest, data);
    let mut bytes = run.provenance.comment().into_bytes();
    pairs.write_csv(&mut bytes, &manifest.hash).map_err(CliError::compute)?;
    let path = run.write("pairs.csv", &bytes)?;
    let mut summary = ingest_line(&manifest);
    let _ = writeln!(
        summary,
        "{} ordered pairs at alpha {} covering {} of {} training molecules",
        pairs.len(),
        cfg.alpha,
        pairs.covered_molecules(),
        pairs.source_size
    );
    deliver(run, started, summary, vec![path])
}

pub fn train_method(
    cfg: &RunConfig,
    task: &Task,
    mode: TrainingMode,
) -> Result<(RegressorModel, Option<usize>), CliError> {
    match mode {
        TrainingMode::Standard => train_standard(
            &task.train.features,
            &task.train.y,
            task.featurizer.clone(),
            &cfg.seeded(&cfg.standard),
            cfg.standard.val_fraction,
        )
        .map(|m| (m, None))
        .map_err(CliError::compute),
        TrainingMode::Sqrl => {
            let (_, pairs) = compute_pairs(cfg, task)?;
            if pairs.is_empty() {
                return Err(CliError::Compute(format!(
                    "no training pairs within alpha = {}; raise alpha (see `sqrl stats`)",
                    cfg.alpha
                )));
            }
            let model = train_sqrl(
                &pairs,
                &task.train.features,
                task.featurizer.clone(),
                &cfg.seeded(&cfg.sqrl),
                cfg.sqrl.val_fraction,
            )
            .map_err(CliError::compute)?;
            Ok((model, Some(pairs.len())))
        }
    }
}

fn model_json(model: &RegressorModel, prov: &Provenance) -> Result<Vec<u8>, CliError> {
    let text = model.to_json().map_err(CliError::compute)?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(CliError::compute)?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert(
            "provenance".into(),
            serde_json::to_value(prov).map_err(CliError::compute)?,
        );
    }
    to_json(&value)
}

pub fn train(cfg: &RunConfig, data: &Path, mode: TrainingMode) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (manifest, task) = prepare(cfg, data)?;
    let (model, pair_count) = train_method(cfg, &task, mode)?;
    let mut run = start_run("train", cfg, &manifest, data);
    let path = run.write(&format!("model_{mode}.json"), &model_json(&model, &run.provenance)?)?;
    let mut summary = ingest_line(&manifest);
    if let Some(n) = pair_count {
        let _ = writeln!(summary, "{n} training pairs at alpha {}", cfg.alpha);
    }
    let _ = writeln!(
        summary,
        "trained {mode} model for {} epochs, kept epoch {}",
        model.training_log.len(),
        model.best_epoch
    );
    deliver(run, started, summary, vec![path])
}

fn load_model(path: &Path) -> Result<RegressorModel, CliError> {
    RegressorModel::load(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn prepare_for_model(
    cfg: &RunConfig,
    data: &Path,
    model: &RegressorModel,
) -> Result<(DatasetManifest, Task), CliError> {
    let manifest = load_manifest(cfg, data)?;
    let task = Task::prepare(&manifest, build_metric(cfg)?, &source_for_model(cfg, model)?)?;
    Ok((manifest, task))
}

/// Predictions for the test split: `id,y_pred`.
pub fn predict(cfg: &RunConfig, data: &Path, model_path: &Path) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let model = load_model(model_path)?;
    let (manifest, task) = prepare_for_model(cfg, data, &model)?;
    let anchors = task.anchors();
    let mut text = String::new();
    for k in 0..task.test.ids.len() {
        let x = task.test.features.row(k);
        let y = match model.mode {
            TrainingMode::Standard => model.predict_standard(x),
            TrainingMode::Sqrl => {
                predict_anchored(&model, &task.test.points[k], x, &anchors, cfg.n_anchors).map(|p| p.value)
            }
        }
        .map_err(|e| CliError::Compute(format!("{}: {e}", task.test.ids[k])))?;
        let _ = writeln!(text, "{},{y}", task.test.ids[k]);
    }
    let mut run = start_run("predict", cfg, &manifest, data);
    run.inputs.push(model_path.to_path_buf());
    let model_hash = crate::dataset::sha256_hex(&std::fs::read(model_path).map_err(CliError::data)?);
    let body = format!(
        "{}# model_sha256={model_hash} mode={}\nid,y_pred\n{text}",
        run.provenance.comment(),
        model.mode
    );
    let path = run.write("predictions.csv", body.as_bytes())?;
    let summary = format!(
        "{}predicted {} test molecules\n",
        ingest_line(&manifest),
        task.test.ids.len()
    );
    deliver(run, started, summary, vec![path])
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub metric: String,
    pub alpha: Option<f64>,
    pub pair_count: Option<usize>,
    pub n_anchors: Option<usize>,
    #[serde(flatten)]
    pub report: EvalReport,
    pub strata: Vec<Stratum>,
}

fn method_report(
    cfg: &RunConfig,
    task: &Task,
    task_id: &str,
    predictor: &Predictor<'_>,
    pair_count: Option<usize>,
) -> Result<MethodReport, CliError> {
    let report = evaluate_task(task_id, predictor, &task.test_set(), &task.anchors()).map_err(CliError::compute)?;
    let strata = stratify_by_distance(&report, &cfg.strata).map_err(CliError::compute)?;
    let sqrl = matches!(predictor, Predictor::Sqrl { .. });
    Ok(MethodReport {
        metric: task.metric.descriptor(),
        alpha: sqrl.then_some(cfg.alpha),
        pair_count,
        n_anchors: sqrl.then_some(cfg.n_anchors),
        report,
        strata,
    })
}

/// Trains (or loads) and scores each method on the test split.
pub fn compute_evaluation(
    cfg: &RunConfig,
    task: &Task,
    task_id: &str,
    methods: &[Method],
    model: Option<&RegressorModel>,
) -> Result<Vec<MethodReport>, CliError> {
    let run_one = |method: Method| -> Result<MethodReport, CliError> {
        match method {
            Method::Knn => {
                let knn = KnnBaseline::new(
                    cfg.knn_k,
                    task.metric.clone(),
                    task.train.points.clone(),
                    task.train.y.clone(),
                )
                .map_err(|e| CliError::Config(e.to_string()))?;
                method_report(cfg, task, task_id, &Predictor::Knn(&knn), None)
            }
            Method::Standard | Method::Sqrl => {
                let mode = if method == Method::Sqrl {
                    TrainingMode::Sqrl
                } else {
                    TrainingMode::Standard
                };
                let (owned, pair_count) = match model {
                    Some(m) if m.mode == mode => (None, None),
                    Some(m) => {
                        return Err(CliError::Config(format!(
                            "model was trained in {} mode, {} requested",
                            m.mode, mode
                        )))
                    }
                    None => {
                        let (m, n) = train_method(cfg, task, mode)?;
                        (Some(m), n)
                    }
                };
                let m = owned.as_ref().or(model).expect("model present");
                let predictor = match mode {
                    TrainingMode::Sqrl => Predictor::Sqrl {
                        model: m,
                        n: cfg.n_anchors,
                    },
                    TrainingMode::Standard => Predictor::Standard(m),
                };
                method_report(cfg, task, task_id, &predictor, pair_count)
            }
        }
    };
    pool(cfg)?.install(|| methods.par_iter().map(|&m| run_one(m)).collect())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| format!("{x:.4}"))
}

/// One line comparing methods for a task.
pub fn comparison_row(task_id: &str, reports: &[MethodReport]) -> String {
    let mut row = format!("task={task_id}");
    for r in reports {
        let m = r.report.method.name();
        let _ = write!(
            row,
            " {m}_mae={:.4} {m}_rho={}",
            r.report.mae,
            fmt_opt(r.report.spearman_rho)
        );
    }
    let rho = |m: Method| {
        reports
            .iter()
            .find(|r| r.report.method == m)
            .and_then(|r| r.report.spearman_rho)
    };
    if let (Some(s), Some(b)) = (rho(Method::Sqrl), rho(Method::Standard)) {
        let _ = write!(row, " delta_rho={:.4}", s - b);
    }
    row
}

pub fn evaluate(
    cfg: &RunConfig,
    data: &Path,
    methods: &[Method],
    model_path: Option<&Path>,
) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let model = model_path.map(load_model).transpose()?;
    let (manifest, task) = match &model {
        Some(m) => prepare_for_model(cfg, data, m)?,
        None => prepare(cfg, data)?,
    };
    let id = task_id(cfg, data);
    let reports = compute_evaluation(cfg, &task, &id, methods, model.as_ref())?;
    let mut run = start_run("evaluate", cfg, &manifest, data);
    run.inputs.extend(model_path.map(Path::to_path_buf));
    let mut paths = Vec::new();
    for r in &reports {
        let bytes = to_json(&Stamped {
            provenance: &run.provenance,
            body: r,
        })?;
        paths.push(run.write(&format!("report_{}.json", r.report.method.name()), &bytes)?);
    }
    let mut summary = ingest_line(&manifest);
    summary.push_str(&comparison_row(&id, &reports));
    summary.push('\n');
    deliver(run, started, summary, paths)
}

/// SQRL trained and scored at every grid α; grid points run on the worker pool.
pub fn compute_sweep(cfg: &RunConfig, task: &Task) -> Result<(SweepResult, Vec<Option<EvalReport>>), CliError> {
    let distances = CondensedDistances::compute(&task.metric, &task.train.points).map_err(CliError::compute)?;
    let inputs = SweepInputs {
        anchors: task.anchors(),
        distances: &distances,
        test: task.test_set(),
        featurizer: task.featurizer.clone(),
        config: cfg.seeded(&cfg.sqrl),
        val_fraction: cfg.sqrl.val_fraction,
        n_anchors: cfg.n_anchors,
    };
    let neighbors = test_neighbors(&inputs.test, &inputs.anchors, cfg.n_anchors).map_err(CliError::compute)?;
    let points = pool(cfg)?.install(|| {
        cfg.alpha_grid
            .par_iter()
            .map(|&a| sweep_point(&inputs, &neighbors, a))
            .collect::<Result<Vec<_>, _>>()
    });
    let (grid, reports) = points.map_err(CliError::compute)?.into_iter().unzip();
    Ok((
        SweepResult {
            metric_kind: task.metric.kind().name().to_string(),
            grid,
        },
        reports,
    ))
}

pub fn sweep(cfg: &RunConfig, data: &Path) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let (manifest, task) = prepare(cfg, data)?;
    let (result, _) = compute_sweep(cfg, &task)?;
    let mut run = start_run("sweep", cfg, &manifest, data);
    let mut csv = run.provenance.comment().into_bytes();
    result.write_csv(&mut csv).map_err(CliError::compute)?;
    let mut paths = vec![run.write("sweep.csv", &csv)?];
    let json = to_json(&Stamped {
        provenance: &run.provenance,
        body: &result,
    })?;
    paths.push(run.write("sweep.json", &json)?);
    let mut summary = ingest_line(&manifest);
    for p in &result.grid {
        let _ = writeln!(
            summary,
            "alpha={} pairs={} mae={} rho={}",
            p.alpha,
            p.pair_count,
            fmt_opt(p.mae),
            fmt_opt(p.spearman)
        );
    }
    deliver(run, started, summary, paths)
}
