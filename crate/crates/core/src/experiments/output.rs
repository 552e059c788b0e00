use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{Computed, RowFailure, SweepAxis, Table};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Sidecar describing how a CSV was produced. The embedded config plus the row
/// seed rule (`seed + row index`) is enough to recompute any row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config_digest: String,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<SweepAxis>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep_values: Vec<f64>,
    pub outputs: Vec<String>,
    pub rows: usize,
    pub failures: Vec<RowFailure>,
    pub notes: BTreeMap<String, f64>,
    pub created_unix_s: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub table: Table,
    pub manifest: Manifest,
    pub csv_path: PathBuf,
    pub manifest_path: PathBuf,
}

pub(crate) fn write_run(
    cfg: &ExperimentConfig,
    command: &str,
    csv_name: &str,
    sweep: Option<(SweepAxis, &[f64])>,
    computed: Computed,
) -> Result<RunOutput> {
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(csv_name);
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = Manifest {
        tool: "nfbm".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: command.to_string(),
        seed: cfg.seed,
        config_digest: cfg.digest(),
        config: cfg.clone(),
        sweep_axis: sweep.map(|(a, _)| a),
        sweep_values: sweep.map(|(_, v)| v.to_vec()).unwrap_or_default(),
        outputs: vec![csv_name.to_string()],
        rows: computed.table.rows.len(),
        failures: computed.failures,
        notes: computed.notes,
        created_unix_s: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_file(&csv_path, computed.table.to_csv().as_bytes())?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_file(&manifest_path, json.as_bytes())?;
    Ok(RunOutput {
        table: computed.table,
        manifest,
        csv_path,
        manifest_path,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
