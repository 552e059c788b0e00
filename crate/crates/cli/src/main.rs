use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nfbm_core::experiments::{self, ExperimentConfig, Metric, Preset, RunOutput, SweepAxis};
use nfbm_core::Error;
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "nfbm",
    version,
    about = "Near-field beamspace modulation vs best-beamspace selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a figure preset (fig2, fig3, fig4, fig5) and write its CSV and manifest.
    Preset {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a base config once per value of one parameter.
    Sweep {
        /// distance, snr_db, k_r, k_t or trials
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(
            long,
            value_delimiter = ',',
            required = true,
            allow_hyphen_values = true
        )]
        values: Vec<f64>,
        /// Preset used as the base when no --config is given.
        #[arg(long, default_value = "fig3")]
        preset: String,
        #[command(flatten)]
        common: Common,
    },
    /// Print analytic and numeric DoF against distance as CSV.
    Dof {
        /// Preset used as the base when no --config is given.
        #[arg(long, default_value = "fig2")]
        preset: String,
        #[command(flatten)]
        common: Common,
    },
    /// Parse and check a config file, then print the resolved config.
    ValidateConfig {
        path: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML config file; missing keys fall back to the file's preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Config override, repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn resolve(&self, preset: &str) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::preset(preset.parse::<Preset>()?),
        };
        cfg.apply_overrides(&self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn summary(out: &RunOutput) -> serde_json::Value {
    json!({
        "csv": out.csv_path,
        "manifest": out.manifest_path,
        "rows": out.manifest.rows,
        "failures": out.manifest.failures,
    })
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Preset { name, common } => {
            let cfg = common.resolve(&name)?;
            let out = experiments::run_config(&cfg)?;
            println!("{}", summary(&out));
        }
        Command::Sweep {
            axis,
            values,
            preset,
            common,
        } => {
            let axis: SweepAxis = axis.parse()?;
            let cfg = common.resolve(&preset)?;
            let out = experiments::sweep(axis, &values, &cfg)?;
            println!("{}", summary(&out));
        }
        Command::Dof { preset, common } => {
            let mut cfg = common.resolve(&preset)?;
            cfg.metric = Metric::Dof;
            if common.out.is_some() {
                let out = experiments::run_config(&cfg)?;
                print!("{}", out.table.to_csv());
            } else {
                print!("{}", experiments::compute(&cfg)?.table.to_csv());
            }
        }
        Command::ValidateConfig { path, overrides } => {
            let mut cfg = ExperimentConfig::load(&path)?;
            cfg.apply_overrides(&overrides)?;
            cfg.validate()?;
            println!(
                "{}",
                json!({ "ok": true, "config_digest": cfg.digest(), "config": cfg })
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
            );
            ExitCode::FAILURE
        }
    }
}
