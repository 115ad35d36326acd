//! Output files: provenance stamps, atomic writes and run metadata.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::{sha256_hex, Rejected};
use crate::error::CliError;

/// Identifies the inputs an artifact was computed from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub dataset_hash: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(cfg: &RunConfig, dataset_hash: &str) -> Provenance {
        Provenance {
            config_hash: cfg.hash(),
            dataset_hash: dataset_hash.to_string(),
            seed: cfg.seed,
        }
    }

    /// `# config_hash=.. dataset_hash=.. seed=..`
    pub fn comment(&self) -> String {
        format!(
            "# config_hash={} dataset_hash={} seed={}\n",
            self.config_hash, self.dataset_hash, self.seed
        )
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(CliError::compute)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Serialize)]
struct RunMetadata<'a> {
    command: &'a str,
    tool_version: &'a str,
    #[serde(flatten)]
    provenance: &'a Provenance,
    dataset_source: &'a str,
    config: BTreeMap<&'static str, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ingest: Option<&'a IngestSummary>,
    artifacts: Vec<ArtifactEntry>,
    wall_time_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub total: usize,
    pub accepted: usize,
    pub rejected: Vec<Rejected>,
}

#[derive(Debug, Serialize)]
struct ArtifactEntry {
    path: String,
    sha256: String,
}

/// Collects the artifacts of one command and writes them with a
/// `run_metadata_<command>.json` summary.
pub struct Run<'a> {
    pub command: &'static str,
    pub cfg: &'a RunConfig,
    pub provenance: Provenance,
    pub dataset_source: String,
    /// Inputs that must never be overwritten.
    pub inputs: Vec<PathBuf>,
    pub ingest: Option<IngestSummary>,
    written: Vec<ArtifactEntry>,
}

impl<'a> Run<'a> {
    pub fn new(command: &'static str, cfg: &'a RunConfig, provenance: Provenance, dataset_source: &str) -> Run<'a> {
        Run {
            command,
            cfg,
            provenance,
            dataset_source: dataset_source.to_string(),
            inputs: Vec::new(),
            ingest: None,
            written: Vec::new(),
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.cfg.output.join(name)
    }

    fn guard(&self, path: &Path) -> Result<(), CliError> {
        let canon = |p: &Path| fs::canonicalize(p).ok();
        if let Some(target) = canon(path) {
            if self.inputs.iter().any(|i| canon(i).as_ref() == Some(&target)) {
                return Err(CliError::Config(format!(
                    "refusing to overwrite input file {}",
                    path.display()
                )));
            }
        }
        Ok(())
    }

    /// Writes `name` inside the output directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        self.write_path(&self.path(name), bytes)
    }

    pub fn write_path(&mut self, path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = path.to_path_buf();
        let name = match path.strip_prefix(&self.cfg.output) {
            Ok(rel) => rel.display().to_string(),
            Err(_) => path.display().to_string(),
        };
        self.guard(&path)?;
        write_atomic(&path, bytes).map_err(|e| CliError::Compute(format!("writing {}: {e}", path.display())))?;
        self.written.push(ArtifactEntry {
            path: name,
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn finish(self, wall: Duration) -> Result<PathBuf, CliError> {
        let name = format!("run_metadata_{}.json", self.command);
        let meta = RunMetadata {
            command: self.command,
            tool_version: env!("CARGO_PKG_VERSION"),
            provenance: &self.provenance,
            dataset_source: &self.dataset_source,
            config: self.cfg.to_map(),
            ingest: self.ingest.as_ref(),
            artifacts: self.written,
            wall_time_seconds: wall.as_secs_f64(),
        };
        let bytes = to_json(&meta)?;
        let path = self.cfg.output.join(&name);
        write_atomic(&path, &bytes).map_err(|e| CliError::Compute(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}
