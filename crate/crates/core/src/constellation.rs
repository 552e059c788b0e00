//! Gray-labelled unit-average-power constellations.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constellation {
    #[serde(rename = "bpsk")]
    Bpsk,
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "16qam")]
    Qam16,
    #[serde(rename = "64qam")]
    Qam64,
}

impl Constellation {
    pub fn bits(self) -> u32 {
        match self {
            Constellation::Bpsk => 1,
            Constellation::Qpsk => 2,
            Constellation::Qam16 => 4,
            Constellation::Qam64 => 6,
        }
    }

    pub fn order(self) -> usize {
        1 << self.bits()
    }

    pub fn is_constant_modulus(self) -> bool {
        matches!(self, Constellation::Bpsk | Constellation::Qpsk)
    }

    /// Point carrying bit label `label` (MSB first, in-phase bits before quadrature bits).
    pub fn point(self, label: usize) -> Complex64 {
        assert!(
            label < self.order(),
            "label {label} out of range for {self}"
        );
        match self {
            Constellation::Bpsk => Complex64::new(if label == 0 { 1.0 } else { -1.0 }, 0.0),
            _ => {
                let half = self.bits() / 2;
                let side = 1usize << half;
                let i_bits = label >> half;
                let q_bits = label & (side - 1);
                let level = |g: usize| 2.0 * gray_decode(g) as f64 - (side as f64 - 1.0);
                // Average energy of a square M-QAM with odd-integer levels is 2(M-1)/3.
                let scale = (2.0 * (self.order() as f64 - 1.0) / 3.0).sqrt();
                Complex64::new(level(i_bits) / scale, -level(q_bits) / scale)
            }
        }
    }

    pub fn points(self) -> Vec<Complex64> {
        (0..self.order()).map(|l| self.point(l)).collect()
    }
}

fn gray_decode(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

impl fmt::Display for Constellation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constellation::Bpsk => "bpsk",
            Constellation::Qpsk => "qpsk",
            Constellation::Qam16 => "16qam",
            Constellation::Qam64 => "64qam",
        })
    }
}

impl FromStr for Constellation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Constellation::Bpsk),
            "qpsk" | "4qam" => Ok(Constellation::Qpsk),
            "16qam" | "qam16" => Ok(Constellation::Qam16),
            "64qam" | "qam64" => Ok(Constellation::Qam64),
            other => Err(Error::validation(format!(
                "unknown constellation {other:?}"
            ))),
        }
    }
}
