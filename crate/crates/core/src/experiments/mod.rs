//! Figure presets, parameter sweeps and their on-disk outputs.

mod config;
mod output;
mod run;

pub use config::{ExperimentConfig, Metric, NormalizationKind, Preset, SnrReference};
pub use output::{read_manifest, Manifest, RunOutput, MANIFEST_FILE};
pub use run::{
    channel_at, compute, compute_sweep, geometry_notes, noise_variance, row_seed, Computed,
    RowFailure, SweepAxis, Table,
};

use crate::error::Result;

/// Resolves a config: preset defaults, then `key=value` overrides.
pub fn resolve_preset<S: AsRef<str>>(name: &str, overrides: &[S]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::preset(name.parse()?);
    cfg.apply_overrides(overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a named preset and writes `<preset>.csv` and the manifest to its output dir.
pub fn run_preset<S: AsRef<str>>(name: &str, overrides: &[S]) -> Result<RunOutput> {
    run_config(&resolve_preset(name, overrides)?)
}

pub fn run_config(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let computed = compute(cfg)?;
    output::write_run(
        cfg,
        "preset",
        &format!("{}.csv", cfg.preset),
        None,
        computed,
    )
}

/// Runs a sweep and writes `sweep_<axis>.csv` and the manifest to the base output dir.
pub fn sweep(axis: SweepAxis, values: &[f64], base: &ExperimentConfig) -> Result<RunOutput> {
    let computed = compute_sweep(axis, values, base)?;
    output::write_run(
        base,
        "sweep",
        &format!("sweep_{axis}.csv"),
        Some((axis, values)),
        computed,
    )
}
