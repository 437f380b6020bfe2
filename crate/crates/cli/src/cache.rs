//! Content-addressed job cache. A job's key hashes the toolkit version, the
//! experiment kind, and the fully resolved parameter point; the entry stores
//! the job's rows and artifact bytes. Loading is strict: a partially written
//! or tampered entry reads as a miss and the job simply reruns.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{canonical_json, ExperimentKind};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn job_key(kind: ExperimentKind, point: &toml::Value) -> String {
    let doc = serde_json::json!({
        "version": crate::TOOLKIT_VERSION,
        "kind": kind.to_string(),
        "point": canonical_json(point),
    });
    sha256_hex(doc.to_string().as_bytes())
}

/// What a finished job leaves behind: numeric rows for the combined CSV and
/// named artifact files, plus a small JSON summary merged into the manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobOutput {
    pub rows: Vec<Vec<f64>>,
    /// (relative file name, bytes); bytes live next to the metadata in the
    /// cache entry, named by their position.
    #[serde(skip)]
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub summary: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
struct EntryMeta {
    rows: Vec<Vec<f64>>,
    artifact_names: Vec<String>,
    summary: serde_json::Value,
}

pub struct Cache {
    root: PathBuf,
}

impl Cache {
    pub fn at(root: PathBuf) -> Self {
        Self { root }
    }

    /// Cache directory for an output dir, honoring the env override.
    pub fn resolve(output_dir: &Path) -> Self {
        let root = std::env::var_os(crate::CACHE_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| output_dir.join(".cache"));
        Self::at(root)
    }

    fn entry_dir(&self, key: &str) -> PathBuf {
        self.root.join(key)
    }

    pub fn load(&self, key: &str) -> Option<JobOutput> {
        let dir = self.entry_dir(key);
        let meta: EntryMeta =
            serde_json::from_slice(&std::fs::read(dir.join("job.json")).ok()?).ok()?;
        let mut artifacts = Vec::with_capacity(meta.artifact_names.len());
        for (i, name) in meta.artifact_names.iter().enumerate() {
            let bytes = std::fs::read(dir.join(format!("a{i:03}"))).ok()?;
            artifacts.push((name.clone(), bytes));
        }
        Some(JobOutput {
            rows: meta.rows,
            artifacts,
            summary: meta.summary,
        })
    }

    /// Best-effort store: a cache write failure must not fail the job, so
    /// errors only skip the entry. The metadata file is written last and
    /// atomically renamed; readers treat its absence as a miss.
    pub fn store(&self, key: &str, output: &JobOutput) {
        let dir = self.entry_dir(key);
        if std::fs::create_dir_all(&dir).is_err() {
            return;
        }
        for (i, (_, bytes)) in output.artifacts.iter().enumerate() {
            if std::fs::write(dir.join(format!("a{i:03}")), bytes).is_err() {
                return;
            }
        }
        let meta = EntryMeta {
            rows: output.rows.clone(),
            artifact_names: output.artifacts.iter().map(|(n, _)| n.clone()).collect(),
            summary: output.summary.clone(),
        };
        let tmp = dir.join("job.json.tmp");
        if serde_json::to_vec_pretty(&meta)
            .ok()
            .and_then(|bytes| std::fs::write(&tmp, bytes).ok())
            .is_some()
        {
            let _ = std::fs::rename(&tmp, dir.join("job.json"));
        }
    }
}
