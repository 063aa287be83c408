//! Append-only JSONL stage stores with content digests.
//!
//! Every stage store is one JSONL file per query plus a `.sha256` sidecar.
//! The run record keeps a marker per completed stage holding the digests of
//! the files it produced; a marker counts only while its digests verify, so
//! tampered or truncated stores force regeneration of that stage and
//! everything downstream.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::OrchestratorError;
use crate::deliberation::IterationAbort;
use crate::trajectory::SlotFailure;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// Serialize items as JSONL, write the file and its `.sha256` sidecar, and
/// return the content digest.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<String, OrchestratorError> {
    let mut body = String::new();
    for item in items {
        body.push_str(&serde_json::to_string(item)?);
        body.push('\n');
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, &body)?;
    let digest = sha256_hex(body.as_bytes());
    std::fs::write(sidecar_path(path), format!("{digest}\n"))?;
    Ok(digest)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, OrchestratorError> {
    let body = std::fs::read_to_string(path)?;
    let mut items = Vec::new();
    for (index, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| OrchestratorError::Store(format!(
            "{}:{}: {e}",
            path.display(),
            index + 1
        )))?;
        items.push(item);
    }
    Ok(items)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".sha256");
    path.with_file_name(name)
}

pub fn file_digest(path: &Path) -> Option<String> {
    std::fs::read(path).ok().map(|bytes| sha256_hex(&bytes))
}

/// One completed stage: file digests plus any per-slot failure markers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageMarker {
    /// Relative path (from run_dir) -> sha256 of the file contents.
    pub files: BTreeMap<String, String>,
    #[serde(default)]
    pub failures: Vec<SlotFailure>,
    #[serde(default)]
    pub aborted: Option<IterationAbort>,
}

impl StageMarker {
    /// True when every referenced file still hashes to its recorded digest.
    pub fn verifies(&self, run_dir: &Path) -> bool {
        self.files
            .iter()
            .all(|(rel, digest)| file_digest(&run_dir.join(rel)).as_deref() == Some(digest))
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct QueryMarkers {
    #[serde(default)]
    pub generate: Option<StageMarker>,
    #[serde(default)]
    pub deliberate: Option<StageMarker>,
}

/// Persistent record of a run: the config snapshot and per-query stage
/// completion markers.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_digest: String,
    #[serde(default)]
    pub config: Option<RunConfig>,
    #[serde(default)]
    pub queries: BTreeMap<String, QueryMarkers>,
}

pub const RUN_RECORD_FILE: &str = "run_record.json";

impl RunRecord {
    /// Load the record for this run_dir, resetting it when the config has
    /// drifted from the recorded snapshot.
    pub fn load_or_init(run_dir: &Path, config: &RunConfig) -> Self {
        let path = run_dir.join(RUN_RECORD_FILE);
        let digest = config.digest();
        if let Ok(body) = std::fs::read_to_string(&path) {
            if let Ok(record) = serde_json::from_str::<RunRecord>(&body) {
                if record.config_digest == digest {
                    return record;
                }
            }
        }
        RunRecord {
            config_digest: digest,
            config: Some(config.clone()),
            queries: BTreeMap::new(),
        }
    }

    pub fn load(run_dir: &Path) -> Option<Self> {
        let body = std::fs::read_to_string(run_dir.join(RUN_RECORD_FILE)).ok()?;
        serde_json::from_str(&body).ok()
    }

    pub fn save(&self, run_dir: &Path) -> Result<(), OrchestratorError> {
        std::fs::create_dir_all(run_dir)?;
        let body = serde_json::to_string_pretty(self)?;
        std::fs::write(run_dir.join(RUN_RECORD_FILE), body)?;
        Ok(())
    }

    pub fn markers(&self, query_id: &str) -> QueryMarkers {
        self.queries.get(query_id).cloned().unwrap_or_default()
    }
}
