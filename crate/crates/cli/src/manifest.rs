//! Run manifests: the durable record of what a run produced. Every artifact
//! is listed with its content hash so a later reader can prove the files on
//! disk are the ones the run wrote.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cache::sha256_hex;
use crate::config::ExperimentKind;
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Done,
    Failed,
    Cached,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactRecord {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobRecord {
    pub index: usize,
    pub label: String,
    pub status: JobStatus,
    pub wall_ms: u64,
    pub artifacts: Vec<ArtifactRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub jobs: Vec<JobRecord>,
    /// Whole-experiment outputs assembled after the jobs: combined CSVs,
    /// plots, summaries.
    pub combined: Vec<ArtifactRecord>,
}

pub const MANIFEST_FILE: &str = "run-manifest.json";

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn save(&self, dir: &Path) -> Result<std::path::PathBuf, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let bytes = serde_json::to_vec_pretty(self).map_err(|e| CliError::Io(e.to_string()))?;
        std::fs::write(&path, bytes)?;
        Ok(path)
    }

    pub fn any_failed(&self) -> bool {
        self.jobs.iter().any(|j| j.status == JobStatus::Failed)
    }

    fn artifact_records(&self) -> impl Iterator<Item = &ArtifactRecord> {
        self.jobs
            .iter()
            .flat_map(|j| j.artifacts.iter())
            .chain(self.combined.iter())
    }

    /// Confirm every recorded artifact exists and hashes to its recorded
    /// value; returns the mismatches.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        let mut problems = Vec::new();
        for rec in self.artifact_records() {
            match std::fs::read(dir.join(&rec.path)) {
                Ok(bytes) => {
                    let got = sha256_hex(&bytes);
                    if got != rec.sha256 {
                        problems.push(format!("{}: content hash mismatch", rec.path));
                    }
                }
                Err(e) => problems.push(format!("{}: {e}", rec.path)),
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dir: &Path) -> RunManifest {
        let data = b"a,b\n1,2\n";
        std::fs::write(dir.join("data.csv"), data).unwrap();
        RunManifest {
            toolkit_version: crate::TOOLKIT_VERSION.into(),
            kind: ExperimentKind::Budget,
            config_hash: "00".into(),
            jobs: vec![JobRecord {
                index: 0,
                label: "p000".into(),
                status: JobStatus::Done,
                wall_ms: 1,
                artifacts: vec![ArtifactRecord {
                    path: "data.csv".into(),
                    sha256: sha256_hex(data),
                }],
                error: None,
                summary: serde_json::Value::Null,
            }],
            combined: vec![],
        }
    }

    #[test]
    fn verify_accepts_matching_files_and_flags_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = sample(dir.path());
        assert!(manifest.verify(dir.path()).is_empty());
        std::fs::write(dir.path().join("data.csv"), b"tampered").unwrap();
        let problems = manifest.verify(dir.path());
        assert_eq!(problems.len(), 1);
        assert!(problems[0].contains("mismatch"));
    }

    #[test]
    fn save_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = sample(dir.path());
        let path = manifest.save(dir.path()).unwrap();
        let back = RunManifest::load(&path).unwrap();
        assert_eq!(back.config_hash, manifest.config_hash);
        assert_eq!(back.jobs.len(), 1);
        assert_eq!(back.jobs[0].status, JobStatus::Done);
    }
}
