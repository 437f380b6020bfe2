//! Experiment configs: a strict top level plus an opaque `params` table
//! that each experiment kind deserializes with its own strict schema.
//! Sweep axes address leaves of `params` by dotted path; the leaf must
//! already exist so a typo in the path fails loudly before any work.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    GcTransmission,
    PumpAttenuation,
    SnspdFdtdSweep,
    CavityMap,
    Thermal,
    Budget,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::GcTransmission => "gc-transmission",
            Self::PumpAttenuation => "pump-attenuation",
            Self::SnspdFdtdSweep => "snspd-fdtd-sweep",
            Self::CavityMap => "cavity-map",
            Self::Thermal => "thermal",
            Self::Budget => "budget",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the config, rooted at `params.`.
    pub path: String,
    pub values: Vec<toml::Value>,
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output_dir: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub params: toml::Value,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), CliError> {
        if !self.params.is_table() {
            return Err(CliError::Config("params must be a table".into()));
        }
        if self.workers == 0 {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        for axis in &self.sweep {
            if axis.values.is_empty() {
                return Err(CliError::Config(format!(
                    "sweep axis {} has no values",
                    axis.path
                )));
            }
            let rel = axis.path.strip_prefix("params.").ok_or_else(|| {
                CliError::Config(format!(
                    "sweep path {} must start with \"params.\"",
                    axis.path
                ))
            })?;
            if lookup(&self.params, rel).is_none() {
                return Err(CliError::Config(format!(
                    "sweep path {} does not name an existing parameter",
                    axis.path
                )));
            }
        }
        Ok(())
    }

    /// Cartesian product of the sweep axes applied to the base params, first
    /// axis outermost. No axes means one point: the base itself.
    pub fn expand_points(&self) -> Result<Vec<toml::Value>, CliError> {
        let mut points = vec![self.params.clone()];
        for axis in &self.sweep {
            let rel = axis.path.strip_prefix("params.").expect("validated");
            let mut next = Vec::with_capacity(points.len() * axis.values.len());
            for point in &points {
                for value in &axis.values {
                    let mut patched = point.clone();
                    patch(&mut patched, rel, value.clone()).map_err(CliError::Config)?;
                    next.push(patched);
                }
            }
            points = next;
        }
        Ok(points)
    }

    /// Content hash of everything that determines the results: kind, params,
    /// sweep. Where artifacts land and how many workers run them do not
    /// change what is computed, so they stay out of the hash.
    pub fn content_hash(&self) -> String {
        let mut doc = serde_json::Map::new();
        doc.insert("kind".into(), serde_json::json!(self.kind.to_string()));
        doc.insert("params".into(), canonical_json(&self.params));
        let sweep: Vec<serde_json::Value> = self
            .sweep
            .iter()
            .map(|a| {
                serde_json::json!({
                    "path": a.path,
                    "values": a.values.iter().map(canonical_json).collect::<Vec<_>>(),
                })
            })
            .collect();
        doc.insert("sweep".into(), serde_json::Value::Array(sweep));
        crate::cache::sha256_hex(serde_json::Value::Object(doc).to_string().as_bytes())
    }
}

fn lookup<'a>(root: &'a toml::Value, rel_path: &str) -> Option<&'a toml::Value> {
    let mut cur = root;
    for seg in rel_path.split('.') {
        cur = cur.as_table()?.get(seg)?;
    }
    Some(cur)
}

fn patch(root: &mut toml::Value, rel_path: &str, value: toml::Value) -> Result<(), String> {
    let mut cur = root;
    let segs: Vec<&str> = rel_path.split('.').collect();
    let (last, walk) = segs.split_last().ok_or("empty sweep path")?;
    for seg in walk {
        cur = cur
            .as_table_mut()
            .and_then(|t| t.get_mut(*seg))
            .ok_or_else(|| format!("sweep path segment {seg} missing"))?;
    }
    let table = cur
        .as_table_mut()
        .ok_or_else(|| format!("sweep path parent of {last} is not a table"))?;
    if !table.contains_key(*last) {
        return Err(format!("sweep leaf {last} missing"));
    }
    table.insert((*last).to_string(), value);
    Ok(())
}

/// TOML value mapped to JSON with all tables key-sorted, so equal values
/// serialize to equal bytes regardless of declaration order.
pub fn canonical_json(v: &toml::Value) -> serde_json::Value {
    match v {
        toml::Value::String(s) => serde_json::json!(s),
        toml::Value::Integer(i) => serde_json::json!(i),
        toml::Value::Float(f) => serde_json::json!(f),
        toml::Value::Boolean(b) => serde_json::json!(b),
        toml::Value::Datetime(d) => serde_json::json!(d.to_string()),
        toml::Value::Array(items) => {
            serde_json::Value::Array(items.iter().map(canonical_json).collect())
        }
        toml::Value::Table(t) => {
            let mut keys: Vec<&String> = t.keys().collect();
            keys.sort();
            let mut map = serde_json::Map::new();
            for k in keys {
                map.insert(k.clone(), canonical_json(&t[k]));
            }
            serde_json::Value::Object(map)
        }
    }
}
