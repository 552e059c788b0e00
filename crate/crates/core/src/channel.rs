//! Line-of-sight channel synthesis between two arrays.
//!
//! The near-field model uses the exact element-pair distance `r_mn` for both the
//! free-space amplitude `lambda / (4 pi r_mn)` and the phase `exp(-j 2 pi r_mn / lambda)`.
//! The plane-wave model is the rank-one far-field reference built from steering
//! vectors along the center-to-center direction.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ArrayGeometry;

/// Large-scale gain reference of a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Normalization {
    /// Free-space amplitudes as they are.
    Absolute,
    /// Amplitudes multiplied by `4 pi r_cal / lambda`, so a single-element link at
    /// `r_cal` has unit gain.
    Calibrated { r_cal: f64 },
}

impl Normalization {
    fn scale(&self, wavelength: f64) -> Result<f64> {
        match *self {
            Normalization::Absolute => Ok(1.0),
            Normalization::Calibrated { r_cal } => {
                if !(r_cal.is_finite() && r_cal > 0.0) {
                    return Err(Error::validation(format!(
                        "calibration distance must be positive, got {r_cal}"
                    )));
                }
                Ok(4.0 * PI * r_cal / wavelength)
            }
        }
    }
}

/// Complex gains from every tx element (columns) to every rx element (rows).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: DMatrix<Complex64>,
    /// Center-to-center distance in meters.
    pub distance: f64,
    pub normalization: Normalization,
    pub wavelength: f64,
}

impl ChannelMatrix {
    pub fn rx_elements(&self) -> usize {
        self.entries.nrows()
    }

    pub fn tx_elements(&self) -> usize {
        self.entries.ncols()
    }

    /// Builds a channel from raw entries, e.g. for tests or imported matrices.
    pub fn from_entries(entries: DMatrix<Complex64>, distance: f64, wavelength: f64) -> Self {
        ChannelMatrix {
            entries,
            distance,
            normalization: Normalization::Absolute,
            wavelength,
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }
}

fn check_pair(tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<f64> {
    let (ft, fr) = (tx.carrier_frequency(), rx.carrier_frequency());
    if (ft - fr).abs() > 1e-12 * ft.max(fr) {
        return Err(Error::validation(format!(
            "tx and rx carrier frequencies differ ({ft} Hz vs {fr} Hz)"
        )));
    }
    Ok(tx.wavelength())
}

pub fn spherical_los_channel(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    normalization: Normalization,
) -> Result<ChannelMatrix> {
    let wavelength = check_pair(tx, rx)?;
    let scale = normalization.scale(wavelength)?;
    let tx_pos = tx.positions();
    let rx_pos = rx.positions();
    let k = 2.0 * PI / wavelength;

    let mut entries = DMatrix::zeros(rx_pos.len(), tx_pos.len());
    for (m, pr) in rx_pos.iter().enumerate() {
        for (n, pt) in tx_pos.iter().enumerate() {
            let r = (pr - pt).norm();
            if r <= 0.0 {
                return Err(Error::SingularGeometry { tx: n, rx: m });
            }
            let amp = scale * wavelength / (4.0 * PI * r);
            entries[(m, n)] = Complex64::from_polar(amp, -k * r);
        }
    }
    Ok(ChannelMatrix {
        entries,
        distance: (rx.center() - tx.center()).norm(),
        normalization,
        wavelength,
    })
}

pub fn planewave_channel(
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
    normalization: Normalization,
) -> Result<ChannelMatrix> {
    let wavelength = check_pair(tx, rx)?;
    let scale = normalization.scale(wavelength)?;
    let los = rx.center() - tx.center();
    let distance = los.norm();
    if distance <= 0.0 {
        return Err(Error::SingularGeometry { tx: 0, rx: 0 });
    }
    let dir = los / distance;
    let k = 2.0 * PI / wavelength;

    let steering = |g: &ArrayGeometry| -> DVector<Complex64> {
        DVector::from_iterator(
            g.num_elements(),
            (0..g.num_elements())
                .map(|i| Complex64::from_polar(1.0, -k * dir.dot(&g.element_offset(i)))),
        )
    };
    let a_rx = steering(rx);
    let a_tx = steering(tx);
    let bulk = Complex64::from_polar(scale * wavelength / (4.0 * PI * distance), -k * distance);
    let entries = (a_rx * a_tx.adjoint()) * bulk;
    Ok(ChannelMatrix {
        entries,
        distance,
        normalization,
        wavelength,
    })
}

/// Circularly-symmetric complex Gaussian vector with per-entry variance `noise_variance`.
///
/// Panics if `noise_variance` is negative.
pub fn awgn_sample<R: Rng + ?Sized>(
    dimension: usize,
    noise_variance: f64,
    rng: &mut R,
) -> DVector<Complex64> {
    assert!(noise_variance >= 0.0, "noise variance must be non-negative");
    if noise_variance == 0.0 {
        return DVector::zeros(dimension);
    }
    let sigma = (noise_variance / 2.0).sqrt();
    DVector::from_fn(dimension, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(sigma * re, sigma * im)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ChannelSidecar {
    rows: usize,
    cols: usize,
    distance_m: f64,
    normalization: Normalization,
    wavelength_m: f64,
}

/// Writes `<stem>.csv` (rows of interleaved re/im columns) and `<stem>.json` metadata.
pub fn export_channel(h: &ChannelMatrix, dir: &Path, stem: &str) -> Result<()> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)
        .map_err(|e| Error::io(&csv_path, std::io::Error::other(e)))?;
    let header: Vec<String> = (0..h.tx_elements())
        .flat_map(|n| [format!("re_{n}"), format!("im_{n}")])
        .collect();
    w.write_record(&header)
        .map_err(|e| Error::io(&csv_path, e.into()))?;
    for m in 0..h.rx_elements() {
        let row: Vec<String> = h
            .entries
            .row(m)
            .iter()
            .flat_map(|z| [z.re.to_string(), z.im.to_string()])
            .collect();
        w.write_record(&row)
            .map_err(|e| Error::io(&csv_path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;

    let json_path = dir.join(format!("{stem}.json"));
    let sidecar = ChannelSidecar {
        rows: h.rx_elements(),
        cols: h.tx_elements(),
        distance_m: h.distance,
        normalization: h.normalization,
        wavelength_m: h.wavelength,
    };
    let body = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&json_path, body).map_err(|e| Error::io(&json_path, e))
}

/// Reads a channel written by [`export_channel`].
pub fn import_channel(dir: &Path, stem: &str) -> Result<ChannelMatrix> {
    let json_path = dir.join(format!("{stem}.json"));
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let meta: ChannelSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", json_path.display())))?;

    let csv_path = dir.join(format!("{stem}.csv"));
    let mut r = csv::Reader::from_path(&csv_path)
        .map_err(|e| Error::io(&csv_path, std::io::Error::other(e)))?;
    let mut entries = DMatrix::zeros(meta.rows, meta.cols);
    let mut rows = 0;
    for (m, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::io(&csv_path, std::io::Error::other(e)))?;
        if m >= meta.rows || rec.len() != 2 * meta.cols {
            return Err(Error::Config(format!(
                "{}: shape does not match sidecar",
                csv_path.display()
            )));
        }
        for n in 0..meta.cols {
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| {
                    Error::Config(format!("{}: bad number {s:?}: {e}", csv_path.display()))
                })
            };
            entries[(m, n)] = Complex64::new(parse(&rec[2 * n])?, parse(&rec[2 * n + 1])?);
        }
        rows += 1;
    }
    if rows != meta.rows {
        return Err(Error::Config(format!(
            "{}: expected {} rows, found {rows}",
            csv_path.display(),
            meta.rows
        )));
    }
    Ok(ChannelMatrix {
        entries,
        distance: meta.distance_m,
        normalization: meta.normalization,
        wavelength: meta.wavelength_m,
    })
}
