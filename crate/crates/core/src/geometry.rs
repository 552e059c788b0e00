//! Uniform linear arrays, apertures and the Fraunhofer distance.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// How the aperture of an array is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApertureConvention {
    /// Physical extent of the elements, `(N - 1) * d`.
    #[default]
    Span,
    /// One spacing per element, `N * d`.
    Count,
}

/// A uniform linear array of isotropic elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    num_elements: usize,
    spacing: f64,
    carrier_frequency: f64,
    center: Vector3<f64>,
    axis: Vector3<f64>,
}

/// Builds a ULA centred on `center` and laid out along `axis` (normalized here).
pub fn build_ula(
    num_elements: usize,
    spacing: f64,
    carrier_frequency: f64,
    center: Vector3<f64>,
    axis: Vector3<f64>,
) -> Result<ArrayGeometry> {
    if num_elements == 0 {
        return Err(Error::validation("array needs at least one element"));
    }
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(Error::validation(format!(
            "spacing must be positive, got {spacing}"
        )));
    }
    if !(carrier_frequency.is_finite() && carrier_frequency > 0.0) {
        return Err(Error::validation(format!(
            "carrier frequency must be positive, got {carrier_frequency}"
        )));
    }
    if !center.iter().all(|c| c.is_finite()) {
        return Err(Error::validation("array center must be finite"));
    }
    let norm = axis.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::validation("array axis must be a non-zero vector"));
    }
    Ok(ArrayGeometry {
        num_elements,
        spacing,
        carrier_frequency,
        center,
        axis: axis / norm,
    })
}

impl ArrayGeometry {
    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn carrier_frequency(&self) -> f64 {
        self.carrier_frequency
    }

    pub fn center(&self) -> Vector3<f64> {
        self.center
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// Offset of element `k` from the array center.
    pub fn element_offset(&self, k: usize) -> Vector3<f64> {
        let mid = (self.num_elements as f64 - 1.0) / 2.0;
        self.axis * ((k as f64 - mid) * self.spacing)
    }

    pub fn element_position(&self, k: usize) -> Vector3<f64> {
        self.center + self.element_offset(k)
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        (0..self.num_elements)
            .map(|k| self.element_position(k))
            .collect()
    }

    pub fn aperture(&self, convention: ApertureConvention) -> f64 {
        aperture(self, convention)
    }

    /// Same array moved so that its center sits at `center`.
    pub fn with_center(&self, center: Vector3<f64>) -> ArrayGeometry {
        ArrayGeometry {
            center,
            ..self.clone()
        }
    }
}

pub fn aperture(g: &ArrayGeometry, convention: ApertureConvention) -> f64 {
    let n = g.num_elements as f64;
    match convention {
        ApertureConvention::Span => (n - 1.0) * g.spacing,
        ApertureConvention::Count => n * g.spacing,
    }
}

/// Near/far-field boundary `2 D^2 / lambda`.
pub fn fraunhofer_distance(aperture: f64, wavelength: f64) -> Result<f64> {
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(Error::validation(format!(
            "wavelength must be positive, got {wavelength}"
        )));
    }
    if !(aperture.is_finite() && aperture >= 0.0) {
        return Err(Error::validation(format!(
            "aperture must be non-negative, got {aperture}"
        )));
    }
    Ok(2.0 * aperture * aperture / wavelength)
}
