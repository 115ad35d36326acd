//! CSV ingestion with per-row rejection accounting.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use sqrl_core::molgraph::{parse_smiles, MolGraph};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("input has no data rows")]
    Empty,
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("all {0} rows were rejected")]
    AllRejected(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone)]
pub struct DataRow {
    /// 1-based data row number, header excluded.
    pub row: usize,
    pub id: String,
    pub smiles: String,
    pub graph: Arc<MolGraph>,
    pub y: f64,
    pub split: Split,
    pub is_cliff: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Rejected {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub rows: Vec<DataRow>,
    pub source: String,
    /// SHA-256 of the raw input bytes, hex encoded.
    pub hash: String,
    pub rejected: Vec<Rejected>,
}

impl DatasetManifest {
    pub fn total_rows(&self) -> usize {
        self.rows.len() + self.rejected.len()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &DataRow> {
        self.rows.iter().filter(move |r| r.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Replace each label by −log10(y); labels must then be positive.
    pub neg_log10: bool,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn ingest(path: &Path, opts: IngestOptions) -> Result<DatasetManifest, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ingest_bytes(&bytes, &path.display().to_string(), opts)
}

fn parse_bool(s: &str) -> Result<Option<bool>, String> {
    match s.trim().to_ascii_lowercase().as_str() {
        "" | "na" => Ok(None),
        "1" | "true" | "yes" => Ok(Some(true)),
        "0" | "false" | "no" => Ok(Some(false)),
        other => Err(format!("is_cliff: unrecognised value `{other}`")),
    }
}

pub fn ingest_bytes(bytes: &[u8], source: &str, opts: IngestOptions) -> Result<DatasetManifest, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader.headers()?.clone();
    let column = |name: &'static str| headers.iter().position(|h| h == name);
    let mut cols = [0; 4];
    for (slot, name) in cols.iter_mut().zip(["id", "smiles", "y", "split"]) {
        *slot = column(name).ok_or(IngestError::MissingColumn(name))?;
    }
    let [c_id, c_smiles, c_y, c_split] = cols;
    let c_cliff = column("is_cliff");

    let mut rows = Vec::new();
    let mut rejected = Vec::new();
    let mut ids = HashSet::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rejected.push(Rejected {
                    row,
                    reason: format!("unreadable record: {e}"),
                });
                continue;
            }
        };
        let field = |c: usize| record.get(c).unwrap_or("");
        let parsed = (|| {
            let id = field(c_id);
            if id.is_empty() {
                return Err("id: empty".to_string());
            }
            let smiles = field(c_smiles);
            let graph = parse_smiles(smiles).map_err(|e| format!("smiles: {e}"))?;
            let raw: f64 = field(c_y)
                .parse()
                .map_err(|_| format!("y: `{}` is not a number", field(c_y)))?;
            let y = if opts.neg_log10 {
                if !(raw > 0.0) {
                    return Err(format!("y: {raw} is not positive, cannot take -log10"));
                }
                -raw.log10()
            } else {
                raw
            };
            if !y.is_finite() {
                return Err(format!("y: {raw} is not finite"));
            }
            let split = match field(c_split).to_ascii_lowercase().as_str() {
                "train" => Split::Train,
                "test" => Split::Test,
                other => return Err(format!("split: expected train or test, found `{other}`")),
            };
            let is_cliff = match c_cliff {
                Some(c) => parse_bool(field(c))?,
                None => None,
            };
            if !ids.insert(id.to_string()) {
                return Err(format!("id: duplicate `{id}`"));
            }
            Ok(DataRow {
                row,
                id: id.to_string(),
                smiles: smiles.to_string(),
                graph: Arc::new(graph),
                y,
                split,
                is_cliff,
            })
        })();
        match parsed {
            Ok(r) => rows.push(r),
            Err(reason) => {
                log::warn!("row {row} rejected: {reason}");
                rejected.push(Rejected { row, reason });
            }
        }
    }
    if rows.is_empty() {
        return Err(if rejected.is_empty() {
            IngestError::Empty
        } else {
            IngestError::AllRejected(rejected.len())
        });
    }
    Ok(DatasetManifest {
        rows,
        source: source.to_string(),
        hash: sha256_hex(bytes),
        rejected,
    })
}
