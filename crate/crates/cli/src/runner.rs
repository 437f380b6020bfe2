//! Run orchestration: expand the sweep, execute points on a worker pool with
//! content-hash caching, then write artifacts and the manifest from a single
//! thread in job-index order so outputs are byte-identical no matter how many
//! workers ran or in what order jobs finished.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::cache::{job_key, sha256_hex, Cache, JobOutput};
use crate::config::ExperimentConfig;
use crate::experiments;
use crate::manifest::{ArtifactRecord, JobRecord, JobStatus, RunManifest, MANIFEST_FILE};
use crate::CliError;

pub struct RunOutcome {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

enum JobResult {
    Done(JobOutput),
    Cached(JobOutput),
    Failed(String),
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let points = config.expand_points()?;
    // Parse every point up front: a schema error anywhere is a config error
    // and no job may start.
    let parsed = points
        .iter()
        .map(|point| experiments::parse(config.kind, point))
        .collect::<Result<Vec<_>, _>>()
        .map_err(CliError::Config)?;
    std::fs::create_dir_all(&config.output_dir)?;
    let cache = Cache::resolve(&config.output_dir);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let results: Vec<(JobResult, u64)> = pool.install(|| {
        points
            .par_iter()
            .zip(parsed.par_iter())
            .map(|(point, params)| {
                let start = Instant::now();
                let key = job_key(config.kind, point);
                let result = match cache.load(&key) {
                    Some(hit) => JobResult::Cached(hit),
                    None => match experiments::run_point(params) {
                        Ok(output) => {
                            cache.store(&key, &output);
                            JobResult::Done(output)
                        }
                        Err(error) => JobResult::Failed(error),
                    },
                };
                (result, start.elapsed().as_millis() as u64)
            })
            .collect()
    });

    // Single writer: everything below touches the output directory from this
    // thread only, in job-index order.
    let total = results.len();
    let mut jobs = Vec::with_capacity(total);
    let mut outputs: Vec<Option<&JobOutput>> = Vec::with_capacity(total);
    for (index, (result, wall_ms)) in results.iter().enumerate() {
        let label = format!("p{index:03}");
        let (status, output, error) = match result {
            JobResult::Done(o) => (JobStatus::Done, Some(o), None),
            JobResult::Cached(o) => (JobStatus::Cached, Some(o), None),
            JobResult::Failed(e) => (JobStatus::Failed, None, Some(e.clone())),
        };
        let mut artifacts = Vec::new();
        if let Some(output) = output {
            for (name, bytes) in &output.artifacts {
                let file = if total > 1 {
                    format!("{label}_{name}")
                } else {
                    name.clone()
                };
                std::fs::write(config.output_dir.join(&file), bytes)?;
                artifacts.push(ArtifactRecord {
                    path: file,
                    sha256: sha256_hex(bytes),
                });
            }
        }
        jobs.push(JobRecord {
            index,
            label,
            status,
            wall_ms: *wall_ms,
            artifacts,
            error,
            summary: output
                .map(|o| o.summary.clone())
                .unwrap_or(serde_json::Value::Null),
        });
        outputs.push(output);
    }

    let jobs_view: Vec<(String, Option<&JobOutput>)> = jobs
        .iter()
        .zip(&outputs)
        .map(|(rec, out)| (rec.label.clone(), *out))
        .collect();
    let mut combined = Vec::new();
    for (name, bytes) in experiments::finalize(config.kind, &jobs_view).map_err(CliError::Io)? {
        std::fs::write(config.output_dir.join(&name), &bytes)?;
        combined.push(ArtifactRecord {
            path: name,
            sha256: sha256_hex(&bytes),
        });
    }

    let manifest = RunManifest {
        toolkit_version: crate::TOOLKIT_VERSION.into(),
        kind: config.kind,
        config_hash: config.content_hash(),
        jobs,
        combined,
    };
    let manifest_path = manifest.save(&config.output_dir)?;
    Ok(RunOutcome {
        manifest,
        manifest_path,
    })
}

/// Regenerate plots from the CSVs a finished run left behind. Everything the
/// manifest records except the plots themselves must still hash-match; the
/// plots are rebuilt from scratch, so a deleted one is not an error.
pub fn replot(manifest_path: &Path) -> Result<RunOutcome, CliError> {
    let mut manifest = RunManifest::load(manifest_path)?;
    let dir = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let problems: Vec<String> = manifest
        .verify(&dir)
        .into_iter()
        .filter(|p| !p.split(':').next().unwrap_or("").ends_with(".svg"))
        .collect();
    if !problems.is_empty() {
        return Err(CliError::Io(format!(
            "output directory does not match the manifest: {}",
            problems.join("; ")
        )));
    }
    let fresh = experiments::replot(manifest.kind, &dir, &manifest).map_err(CliError::Io)?;
    for (name, bytes) in &fresh {
        std::fs::write(dir.join(name), bytes)?;
        let record = ArtifactRecord {
            path: name.clone(),
            sha256: sha256_hex(bytes),
        };
        match manifest.combined.iter_mut().find(|r| r.path == *name) {
            Some(slot) => *slot = record,
            None => manifest.combined.push(record),
        }
    }
    let manifest_path = dir.join(MANIFEST_FILE);
    manifest.save(&dir)?;
    Ok(RunOutcome {
        manifest,
        manifest_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::JobStatus;

    fn budget_config(dir: &Path, workers: usize) -> ExperimentConfig {
        let text = format!(
            r#"
kind = "budget"
output_dir = "{}"
workers = {workers}

[params]
attenuation_db_per_um = 0.55
thicknesses_um = [100.0, 400.0]

[[sweep]]
path = "params.attenuation_db_per_um"
values = [0.5, 0.55]
"#,
            dir.display()
        );
        ExperimentConfig::from_str(&text).unwrap()
    }

    #[test]
    fn rerun_hits_the_cache_and_outputs_are_worker_invariant() {
        let tmp = tempfile::tempdir().unwrap();
        let out1 = tmp.path().join("w1");
        let first = run_experiment(&budget_config(&out1, 1)).unwrap();
        assert_eq!(first.manifest.jobs.len(), 2);
        assert!(first
            .manifest
            .jobs
            .iter()
            .all(|j| j.status == JobStatus::Done));
        let again = run_experiment(&budget_config(&out1, 1)).unwrap();
        assert!(again
            .manifest
            .jobs
            .iter()
            .all(|j| j.status == JobStatus::Cached));

        let out2 = tmp.path().join("w2");
        run_experiment(&budget_config(&out2, 2)).unwrap();
        let a = std::fs::read(out1.join("budget.csv")).unwrap();
        let b = std::fs::read(out2.join("budget.csv")).unwrap();
        assert_eq!(a, b);
        assert!(first.manifest.verify(&out1).is_empty());
    }

    #[test]
    fn tampered_artifact_blocks_replot() {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path().join("run");
        let outcome = run_experiment(&budget_config(&out, 1)).unwrap();
        std::fs::write(out.join("budget.csv"), b"tampered").unwrap();
        let err = replot(&outcome.manifest_path).unwrap_err();
        match err {
            CliError::Io(message) => assert!(message.contains("budget.csv")),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
