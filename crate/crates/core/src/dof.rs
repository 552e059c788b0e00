//! Spatial degrees of freedom: the analytic distance law, its inverse (threshold
//! distance), and a numerical count from singular values.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

/// `1 + (2 L_T / lambda) / sqrt(1 + 4 (r / L_R)^2)`.
///
/// `tx_aperture` is the user-side aperture `L_T`, `rx_aperture` the base-station
/// aperture `L_R`.
pub fn analytic_dof(
    distance: f64,
    wavelength: f64,
    tx_aperture: f64,
    rx_aperture: f64,
) -> Result<f64> {
    positive("distance", distance)?;
    positive("wavelength", wavelength)?;
    positive("rx aperture", rx_aperture)?;
    if !(tx_aperture.is_finite() && tx_aperture >= 0.0) {
        return Err(Error::validation(format!(
            "tx aperture must be non-negative, got {tx_aperture}"
        )));
    }
    let ratio = distance / rx_aperture;
    Ok(1.0 + (2.0 * tx_aperture / wavelength) / (1.0 + 4.0 * ratio * ratio).sqrt())
}

/// Largest DoF the analytic law can reach (at zero distance).
pub fn max_analytic_dof(wavelength: f64, tx_aperture: f64) -> f64 {
    1.0 + 2.0 * tx_aperture / wavelength
}

/// Distance at which the analytic DoF equals `xi`.
pub fn threshold_distance(
    xi: f64,
    wavelength: f64,
    tx_aperture: f64,
    rx_aperture: f64,
) -> Result<f64> {
    positive("wavelength", wavelength)?;
    positive("rx aperture", rx_aperture)?;
    if !(tx_aperture.is_finite() && tx_aperture >= 0.0) {
        return Err(Error::validation(format!(
            "tx aperture must be non-negative, got {tx_aperture}"
        )));
    }
    let high = max_analytic_dof(wavelength, tx_aperture);
    if !(xi.is_finite() && xi > 1.0 && xi <= high) {
        return Err(Error::Domain {
            what: "DoF threshold",
            value: xi,
            low: 1.0,
            high,
        });
    }
    let x = 2.0 * tx_aperture / ((xi - 1.0) * wavelength);
    // x >= 1 on the feasible range; (x-1)(x+1) avoids cancellation near x = 1.
    let radicand = ((x - 1.0) * (x + 1.0)).max(0.0);
    Ok(rx_aperture / 2.0 * radicand.sqrt())
}

/// Number of singular values at or above `threshold_fraction * sigma_1`.
pub fn effective_dof(singular_values: &[f64], threshold_fraction: f64) -> Result<usize> {
    if singular_values.is_empty() {
        return Err(Error::validation("singular value list is empty"));
    }
    if !(threshold_fraction > 0.0 && threshold_fraction <= 1.0) {
        return Err(Error::validation(format!(
            "threshold fraction must lie in (0, 1], got {threshold_fraction}"
        )));
    }
    if singular_values.windows(2).any(|w| w[1] > w[0])
        || singular_values.iter().any(|s| s.is_nan() || *s < 0.0)
    {
        return Err(Error::validation(
            "singular values must be non-negative and non-increasing",
        ));
    }
    let top = singular_values[0];
    if top <= 0.0 {
        return Err(Error::DegenerateChannel(
            "all singular values are zero".into(),
        ));
    }
    let cut = threshold_fraction * top;
    Ok(singular_values.iter().take_while(|&&s| s >= cut).count())
}

/// Analytic (and optionally numeric) DoF over a distance grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DofProfile {
    pub distances: Vec<f64>,
    pub analytic_dof: Vec<f64>,
    pub numeric_dof: Option<Vec<usize>>,
    pub tx_aperture: f64,
    pub rx_aperture: f64,
    pub wavelength: f64,
}

impl DofProfile {
    pub fn analytic(
        distances: &[f64],
        wavelength: f64,
        tx_aperture: f64,
        rx_aperture: f64,
    ) -> Result<Self> {
        let analytic_dof = distances
            .iter()
            .map(|&r| analytic_dof(r, wavelength, tx_aperture, rx_aperture))
            .collect::<Result<Vec<_>>>()?;
        Ok(DofProfile {
            distances: distances.to_vec(),
            analytic_dof,
            numeric_dof: None,
            tx_aperture,
            rx_aperture,
            wavelength,
        })
    }

    pub fn with_numeric(mut self, numeric: Vec<usize>) -> Result<Self> {
        if numeric.len() != self.distances.len() {
            return Err(Error::validation(
                "numeric DoF length does not match the distance grid",
            ));
        }
        self.numeric_dof = Some(numeric);
        Ok(self)
    }

    /// CSV with columns `distance_m, analytic_dof, numeric_dof` (last column empty
    /// when no numeric counts are attached).
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["distance_m", "analytic_dof", "numeric_dof"])
            .unwrap();
        for (i, r) in self.distances.iter().enumerate() {
            let numeric = self
                .numeric_dof
                .as_ref()
                .map(|n| n[i].to_string())
                .unwrap_or_default();
            w.write_record([r.to_string(), self.analytic_dof[i].to_string(), numeric])
                .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
