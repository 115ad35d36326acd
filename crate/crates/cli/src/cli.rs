//! Argument parsing and dispatch for the `sqrl` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sqrl_core::evaluation::Method;
use sqrl_core::regressor::TrainingMode;

use crate::commands::{self, Outcome};
use crate::config::{RunConfig, KEYS};
use crate::error::CliError;
use crate::synth::SynthConfig;

#[derive(Debug, Parser)]
#[command(
    name = "sqrl",
    version,
    about = "Similarity-thresholded relative learning for molecular property prediction"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Flat `key = value` config file, applied before overrides.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// `key=value` override; repeatable, applied in order.
    #[arg(short = 's', long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory (key `output`).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed (key `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Pair distance threshold (key `alpha`).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Distance metric (key `metric`).
    #[arg(long, global = true)]
    pub metric: Option<String>,
    /// Worker threads (key `workers`).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Transform labels to -log10(y) on ingest (key `neg_log10`).
    #[arg(long, global = true)]
    pub neg_log10: bool,
    /// Log verbosity: -v info, -vv debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Sqrl,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMethods {
    Sqrl,
    Standard,
    Knn,
    /// SQRL and standard.
    Both,
    /// SQRL, standard and k-NN.
    All,
}

impl EvalMethods {
    pub fn methods(self) -> Vec<Method> {
        match self {
            EvalMethods::Sqrl => vec![Method::Sqrl],
            EvalMethods::Standard => vec![Method::Standard],
            EvalMethods::Knn => vec![Method::Knn],
            EvalMethods::Both => vec![Method::Sqrl, Method::Standard],
            EvalMethods::All => vec![Method::Sqrl, Method::Standard, Method::Knn],
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print every config key with its default value.
    Defaults,
    /// Write a synthetic benchmark dataset.
    Synthesize {
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SynthConfig::default().molecules)]
        molecules: usize,
    },
    /// Sparse feature vectors for every accepted molecule.
    Featurize { data: PathBuf },
    /// Pairwise distance statistics of the training split and a suggested alpha.
    Stats { data: PathBuf },
    /// Ordered training pairs within alpha.
    Pairs { data: PathBuf },
    /// Train a model on the training split.
    Train {
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelKind::Sqrl)]
        method: ModelKind,
    },
    /// Predict the test split with a trained model.
    Predict {
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Train and score methods on the test split.
    Evaluate {
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = EvalMethods::Both)]
        method: EvalMethods,
        /// Score this model instead of training one (single method only).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train and score SQRL at every alpha of the grid.
    Sweep { data: PathBuf },
}

impl Global {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        for kv in &self.overrides {
            cfg.apply_override(kv)?;
        }
        let flags = [
            ("output", self.output.as_ref().map(|p| p.display().to_string())),
            ("seed", self.seed.map(|s| s.to_string())),
            ("alpha", self.alpha.map(|a| a.to_string())),
            ("metric", self.metric.clone()),
            ("workers", self.workers.map(|w| w.to_string())),
            ("neg_log10", self.neg_log10.then(|| "true".to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn defaults_text() -> String {
    let cfg = RunConfig::default();
    let map = cfg.to_map();
    let mut out = String::new();
    for (key, doc) in KEYS {
        out.push_str(&format!("# {doc}\n"));
        match map.get(key) {
            Some(v) => out.push_str(&format!("{key} = {v}\n")),
            None => out.push_str(&format!("# {key} = scaled\n")),
        }
    }
    out
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    if let Command::Defaults = cli.command {
        return Ok(Outcome {
            artifacts: Vec::new(),
            summary: defaults_text(),
        });
    }
    let cfg = cli.global.resolve()?;
    match &cli.command {
        Command::Defaults => unreachable!(),
        Command::Synthesize { out, molecules } => {
            let synth = SynthConfig {
                molecules: *molecules,
                seed: cfg.seed,
                ..SynthConfig::default()
            };
            commands::synthesize(&cfg, &synth, out)
        }
        Command::Featurize { data } => commands::featurize(&cfg, data),
        Command::Stats { data } => commands::stats(&cfg, data),
        Command::Pairs { data } => commands::pairs(&cfg, data),
        Command::Train { data, method } => {
            let mode = match method {
                ModelKind::Sqrl => TrainingMode::Sqrl,
                ModelKind::Standard => TrainingMode::Standard,
            };
            commands::train(&cfg, data, mode)
        }
        Command::Predict { data, model } => commands::predict(&cfg, data, model),
        Command::Evaluate { data, method, model } => {
            let methods = method.methods();
            if model.is_some() && methods.len() != 1 {
                return Err(CliError::Config("--model needs a single --method".into()));
            }
            commands::evaluate(&cfg, data, &methods, model.as_deref())
        }
        Command::Sweep { data } => commands::sweep(&cfg, data),
    }
}
