//! Input loading, atomic output writing and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sidewinder::model::{RobotModel, TunableParams};
use sidewinder::sim::{MeasurementNoise, RolloutConfig, Trajectory};

use crate::error::CliError;

/// Name of the index file inside a reference directory.
pub const REFERENCE_INDEX: &str = "references.json";

/// Contents of a reference directory written by `make-reference`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceIndex {
    pub model: String,
    pub rollout: String,
    pub nominal: String,
    pub noise: MeasurementNoise,
    pub references: Vec<ReferenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceEntry {
    pub name: String,
    pub trajectory: String,
    pub gait: String,
}

impl ReferenceIndex {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(REFERENCE_INDEX);
        let text = fs::read_to_string(&path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
    }
}

pub fn load_model(path: Option<&Path>) -> Result<RobotModel, CliError> {
    Ok(match path {
        Some(p) => RobotModel::load(p)?,
        None => RobotModel::cobra(),
    })
}

pub fn load_params(path: Option<&Path>) -> Result<TunableParams, CliError> {
    Ok(match path {
        Some(p) => TunableParams::load(p)?,
        None => TunableParams::nominal(),
    })
}

pub fn load_rollout(path: Option<&Path>) -> Result<RolloutConfig, CliError> {
    let config = match path {
        Some(p) => RolloutConfig::load(p)?,
        None => RolloutConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

pub fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))
}

/// Writes through a sibling temporary file and a rename, so readers never
/// observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("plain data always serializes");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<(), CliError> {
    let mut buf = Vec::new();
    traj.write_csv(&mut buf)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    write_atomic(path, &buf)
}

pub fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io)?;
    }
    let buf = w.into_inner().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    write_atomic(path, &buf)
}

/// Record of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub config_paths: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

pub struct ManifestBuilder {
    command: String,
    started: DateTime<Utc>,
    config_paths: BTreeMap<String, String>,
    seed: Option<u64>,
    outputs: Vec<PathBuf>,
}

fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl ManifestBuilder {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            started: Utc::now(),
            config_paths: BTreeMap::new(),
            seed: None,
            outputs: Vec::new(),
        }
    }

    pub fn config(&mut self, role: &str, path: &Path) {
        self.config_paths.insert(role.to_string(), path.display().to_string());
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Checks that every listed output exists and writes the manifest atomically.
    pub fn finish(self, path: &Path) -> Result<(), CliError> {
        if let Some(missing) = self.outputs.iter().find(|p| !p.exists()) {
            return Err(CliError::Io(format!("expected output {} was not written", missing.display())));
        }
        let manifest = RunManifest {
            command: self.command,
            arguments: std::env::args().skip(1).collect(),
            config_paths: self.config_paths,
            seed: self.seed,
            version: format!("sidewinder {}", env!("CARGO_PKG_VERSION")),
            started_at: timestamp(self.started),
            finished_at: timestamp(Utc::now()),
            outputs: self.outputs.iter().map(|p| p.display().to_string()).collect(),
        };
        write_json(path, &manifest)
    }
}

/// File stem of `path` as a string, for naming derived outputs.
pub fn stem(path: &Path) -> Result<String, CliError> {
    path.file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::Config(format!("cannot derive a name from {}", path.display())))
}

/// `path` with `suffix` appended to its stem, e.g. `tuned.json` → `tuned.log.jsonl`.
pub fn sibling(path: &Path, suffix: &str) -> Result<PathBuf, CliError> {
    Ok(path.with_file_name(format!("{}{suffix}", stem(path)?)))
}
