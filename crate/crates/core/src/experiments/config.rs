//! Experiment configuration: a flat TOML file with units in the key names.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beamspace::{DEFAULT_SUBSET_CAP, DEFAULT_THRESHOLD_FRACTION};
use crate::channel::Normalization;
use crate::constellation::Constellation;
use crate::error::{Error, Result};
use crate::geometry::{build_ula, ApertureConvention, ArrayGeometry, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 5] = [
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Custom => "custom",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPreset {
                name: s.to_string(),
                known: Preset::ALL.map(|p| p.name()).join(", "),
            })
    }
}

/// What a run measures per row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Analytic and numeric DoF against distance.
    Dof,
    /// BBS and BM spectral efficiency against distance.
    Se,
    /// BBS and BM symbol error rate against distance.
    Ser,
    /// Spectral efficiency against the number of receive chains.
    RfChains,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationKind {
    Absolute,
    Calibrated,
}

/// Reference point of `snr_db`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrReference {
    /// Unit transmit power over noise: the per-element receive SNR of a
    /// single-element link at the calibration distance.
    Element,
    /// Total received SNR `P ||H(r_cal)||_F^2 / N0` of the full arrays at the
    /// calibration distance.
    Received,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub metric: Metric,

    pub tx_elements: usize,
    pub tx_spacing_in_wavelengths: f64,
    pub tx_frequency_ghz: f64,
    pub tx_center_xyz_m: [f64; 3],
    pub tx_axis_xyz: [f64; 3],

    pub rx_elements: usize,
    pub rx_spacing_in_wavelengths: f64,
    pub rx_frequency_ghz: f64,
    /// Offset added to `tx_center + distance * boresight` (zero keeps the arrays facing).
    pub rx_center_xyz_m: [f64; 3],
    pub rx_axis_xyz: [f64; 3],
    pub boresight_xyz: [f64; 3],

    pub distance_m: Vec<f64>,
    pub snr_db: f64,
    pub snr_reference: SnrReference,
    pub normalization: NormalizationKind,
    pub calibration_distance_m: f64,

    pub k_t: usize,
    pub k_r: usize,
    /// Receive-chain grid for the rf_chains metric; empty means `1..=effective_dof + 4`.
    pub k_r_values: Vec<usize>,
    pub subset_cap: usize,
    pub dof_threshold_fraction: f64,
    pub aperture_convention: ApertureConvention,
    pub dof_xi: f64,

    pub bbs_constellation: Constellation,
    pub bm_constellation: Constellation,
    pub bm_index_bits: u32,

    pub trials: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Built-in defaults for a preset.
    pub fn preset(preset: Preset) -> Self {
        let base = ExperimentConfig {
            preset,
            metric: Metric::Se,
            tx_elements: 48,
            tx_spacing_in_wavelengths: 0.5,
            tx_frequency_ghz: 28.0,
            tx_center_xyz_m: [0.0; 3],
            tx_axis_xyz: [1.0, 0.0, 0.0],
            rx_elements: 256,
            rx_spacing_in_wavelengths: 0.5,
            rx_frequency_ghz: 28.0,
            rx_center_xyz_m: [0.0; 3],
            rx_axis_xyz: [1.0, 0.0, 0.0],
            boresight_xyz: [0.0, 1.0, 0.0],
            distance_m: vec![50.0, 25.0, 10.0, 5.0, 1.0],
            snr_db: 20.0,
            snr_reference: SnrReference::Element,
            normalization: NormalizationKind::Calibrated,
            calibration_distance_m: 50.0,
            k_t: 1,
            k_r: 48,
            k_r_values: Vec::new(),
            subset_cap: DEFAULT_SUBSET_CAP,
            dof_threshold_fraction: DEFAULT_THRESHOLD_FRACTION,
            aperture_convention: ApertureConvention::Span,
            dof_xi: 2.0,
            bbs_constellation: Constellation::Qam16,
            bm_constellation: Constellation::Qpsk,
            bm_index_bits: 2,
            trials: 100_000,
            seed: 1,
            output_dir: PathBuf::from(format!("results/{}", preset.name())),
        };
        match preset {
            Preset::Fig2 => ExperimentConfig {
                metric: Metric::Dof,
                tx_elements: 128,
                distance_m: vec![
                    1.0, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0, 70.0, 100.0,
                    150.0, 200.0,
                ],
                k_r: 128,
                dof_xi: 3.0,
                ..base
            },
            Preset::Fig3 | Preset::Custom => base,
            Preset::Fig4 => ExperimentConfig {
                metric: Metric::Ser,
                snr_reference: SnrReference::Received,
                calibration_distance_m: 5.0,
                ..base
            },
            Preset::Fig5 => ExperimentConfig {
                metric: Metric::RfChains,
                distance_m: vec![5.0],
                ..base
            },
        }
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / (self.tx_frequency_ghz * 1e9)
    }

    pub fn tx_geometry(&self) -> Result<ArrayGeometry> {
        let lambda = SPEED_OF_LIGHT / (self.tx_frequency_ghz * 1e9);
        build_ula(
            self.tx_elements,
            self.tx_spacing_in_wavelengths * lambda,
            self.tx_frequency_ghz * 1e9,
            Vector3::from(self.tx_center_xyz_m),
            Vector3::from(self.tx_axis_xyz),
        )
    }

    /// Receive array placed `distance` meters along the boresight from the tx center.
    pub fn rx_geometry(&self, distance: f64) -> Result<ArrayGeometry> {
        let boresight = Vector3::from(self.boresight_xyz);
        let norm = boresight.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::validation("boresight must be a non-zero vector"));
        }
        let lambda = SPEED_OF_LIGHT / (self.rx_frequency_ghz * 1e9);
        let center = Vector3::from(self.tx_center_xyz_m)
            + boresight * (distance / norm)
            + Vector3::from(self.rx_center_xyz_m);
        build_ula(
            self.rx_elements,
            self.rx_spacing_in_wavelengths * lambda,
            self.rx_frequency_ghz * 1e9,
            center,
            Vector3::from(self.rx_axis_xyz),
        )
    }

    pub fn channel_normalization(&self) -> Normalization {
        match self.normalization {
            NormalizationKind::Absolute => Normalization::Absolute,
            NormalizationKind::Calibrated => Normalization::Calibrated {
                r_cal: self.calibration_distance_m,
            },
        }
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn subset_cap(&self) -> Option<usize> {
        Some(self.subset_cap)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.distance_m.is_empty() {
            return bad("distance_m must not be empty".into());
        }
        if self.distance_m.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("distance_m entries must be positive".into());
        }
        let ascending = self.distance_m.windows(2).all(|w| w[0] < w[1]);
        let descending = self.distance_m.windows(2).all(|w| w[0] > w[1]);
        if !(ascending || descending) {
            return bad("distance_m must be strictly sorted (ascending or descending)".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db must be finite".into());
        }
        if !(self.calibration_distance_m.is_finite() && self.calibration_distance_m > 0.0) {
            return bad("calibration_distance_m must be positive".into());
        }
        if !(self.dof_threshold_fraction > 0.0 && self.dof_threshold_fraction <= 1.0) {
            return bad("dof_threshold_fraction must lie in (0, 1]".into());
        }
        if self.k_t == 0 || self.k_r == 0 || self.subset_cap == 0 {
            return bad("k_t, k_r and subset_cap must be at least 1".into());
        }
        if self.k_r_values.contains(&0) {
            return bad("k_r_values entries must be at least 1".into());
        }
        if (self.tx_frequency_ghz - self.rx_frequency_ghz).abs()
            > 1e-12 * self.tx_frequency_ghz.abs()
        {
            return bad("tx_frequency_ghz and rx_frequency_ghz must match".into());
        }
        self.tx_geometry()?;
        self.rx_geometry(self.distance_m[0])?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    /// Parses a (possibly partial) config file; missing keys come from the
    /// defaults of the file's `preset` (or `custom`).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        let preset = match table.get("preset") {
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => {
                return Err(Error::Config(format!(
                    "preset must be a string, got {other}"
                )))
            }
            None => Preset::Custom,
        };
        let mut cfg = Self::preset(preset);
        cfg.merge_table(table)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string()).map_err(|e| Error::io(path, e))
    }

    fn merge_table(&mut self, overrides: toml::Table) -> Result<()> {
        let mut table = toml::Table::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in overrides {
            if !table.contains_key(&k) {
                return Err(Error::Config(format!("unknown key {k:?}")));
            }
            table.insert(k, v);
        }
        *self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// Applies `key=value` overrides; values use TOML syntax, with bare words
    /// taken as strings.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        let mut table = toml::Table::new();
        for o in overrides {
            let o = o.as_ref();
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override {o:?} is not key=value")))?;
            let (key, value) = (key.trim(), value.trim());
            let parsed = format!("v = {value}")
                .parse::<toml::Table>()
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(value.to_string()));
            table.insert(key.to_string(), parsed);
        }
        self.merge_table(table)
    }

    /// SHA-256 of the canonical TOML form, excluding the output directory.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let hash = Sha256::digest(c.to_toml_string().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}
