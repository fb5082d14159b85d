//! Run directories, manifests and frozen CSV schemas.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RawConfig;
use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub subcommand: String,
    pub tool_version: String,
    pub master_seed: u64,
    pub torus_volume_ratio: Option<f64>,
    pub config: RawConfig,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("manifest {}: {e}", path.display())))
}

/// Output directory collecting the names of the files written to it.
pub struct RunDir {
    path: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(path: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(RunDir {
            path,
            outputs: Vec::new(),
        })
    }

    fn target(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.path.join(name)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.text(name, &text)
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.target(name);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// CSV whose first column is the schema tag `schema`.
    pub fn csv(&mut self, name: &str, schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.target(name);
        let mut w = csv::Writer::from_path(&path)?;
        let mut head = vec!["schema"];
        head.extend_from_slice(header);
        w.write_record(&head)?;
        for row in rows {
            w.write_record(std::iter::once(schema).chain(row.iter().map(String::as_str)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<(), CliError> {
        manifest.outputs = self.outputs;
        manifest.finished_unix = unix_now();
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        let path = self.path.join(MANIFEST);
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Drops `key` from a serialized report (per-trial data goes to CSV).
pub fn without(mut value: Value, key: &str) -> Value {
    if let Value::Object(map) = &mut value {
        map.remove(key);
    }
    value
}
