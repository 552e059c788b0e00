//! BBS and BM spectral efficiency, activation probabilities, and the finite
//! signal sets used for symbol-error simulation.
//!
//! The BM rate model treats the active beam subset as an extra information
//! source that the receiver resolves: `R = H(p) + sum_i p_i C_i`. Its maximizer
//! over the simplex is the Gibbs form `p_i = 2^{C_i} / sum_j 2^{C_j}`, giving
//! `R = log2 sum_j 2^{C_j}`. This is the model implemented here; it is not a
//! published closed form for the optimal probabilities.

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64;

use crate::beamspace::{
    combination_capacity, enumerate_subsets, BeamSubset, BeamspaceDecomposition,
};
use crate::constellation::Constellation;
use crate::error::{Error, Result};

/// Beam subsets with their capacities and activation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDistribution {
    pub subsets: Vec<BeamSubset>,
    pub capacities: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ActivationDistribution {
    /// Entropy of the activation probabilities in bits.
    pub fn index_entropy(&self) -> f64 {
        self.probabilities
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.log2())
            .sum()
    }

    /// `H(p) + sum p_i C_i`.
    pub fn rate(&self) -> f64 {
        self.index_entropy()
            + self
                .probabilities
                .iter()
                .zip(&self.capacities)
                .map(|(p, c)| p * c)
                .sum::<f64>()
    }

    /// CSV with columns `subset, capacity_bps_hz, probability`; subset indices are
    /// space-separated.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["subset", "capacity_bps_hz", "probability"])
            .unwrap();
        for ((s, c), p) in self
            .subsets
            .iter()
            .zip(&self.capacities)
            .zip(&self.probabilities)
        {
            w.write_record([s.to_string(), c.to_string(), p.to_string()])
                .unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// `log2 sum_i 2^{C_i}`, computed stably.
pub fn log_sum_exp2(capacities: &[f64]) -> f64 {
    let top = capacities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    top + capacities
        .iter()
        .map(|c| (c - top).exp2())
        .sum::<f64>()
        .log2()
}

/// Capacity-maximizing activation probabilities `2^{C_i} / sum_j 2^{C_j}`.
pub fn optimal_activation(capacities: &[f64]) -> Result<Vec<f64>> {
    if capacities.is_empty() {
        return Err(Error::validation("need at least one subset capacity"));
    }
    if capacities.iter().any(|c| !c.is_finite()) {
        return Err(Error::validation("subset capacities must be finite"));
    }
    let top = capacities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = capacities.iter().map(|c| (c - top).exp2()).collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Eigenbeams usable after a `k_r`-chain combiner built from the top left
/// singular vectors: the first `min(k_r, effective_dof)` beams.
pub fn surviving_beams(d: &BeamspaceDecomposition, k_r: usize) -> Result<usize> {
    if k_r == 0 || k_r > d.rx_elements() {
        return Err(Error::validation(format!(
            "receive chain count {k_r} must lie in 1..={}",
            d.rx_elements()
        )));
    }
    Ok(k_r.min(d.effective_dof))
}

fn check_common(k_t: usize, total_power: f64, noise_variance: f64) -> Result<()> {
    if k_t == 0 {
        return Err(Error::validation("transmit chain count must be at least 1"));
    }
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(Error::validation(format!(
            "total power must be positive, got {total_power}"
        )));
    }
    if !(noise_variance.is_finite() && noise_variance > 0.0) {
        return Err(Error::validation(format!(
            "noise variance must be positive, got {noise_variance}"
        )));
    }
    Ok(())
}

/// Best-beamspace selection: multiplex over the strongest `min(k_t, beams)` eigenbeams.
pub fn bbs_rate(
    d: &BeamspaceDecomposition,
    k_t: usize,
    k_r: usize,
    total_power: f64,
    noise_variance: f64,
) -> Result<f64> {
    check_common(k_t, total_power, noise_variance)?;
    let beams = surviving_beams(d, k_r)?;
    let top = BeamSubset::new((0..k_t.min(beams)).collect())?;
    combination_capacity(d, &top, total_power, noise_variance)
}

/// Beamspace modulation: hop over up to `subset_cap` size-`k_t` subsets of the
/// surviving beams with Gibbs activation probabilities.
pub fn bm_rate(
    d: &BeamspaceDecomposition,
    k_t: usize,
    k_r: usize,
    total_power: f64,
    noise_variance: f64,
    subset_cap: Option<usize>,
) -> Result<(f64, ActivationDistribution)> {
    check_common(k_t, total_power, noise_variance)?;
    let beams = surviving_beams(d, k_r)?;
    let gains = &d.gains()[..beams];
    let subsets = enumerate_subsets(gains, k_t.min(beams), subset_cap)?;
    let capacities = subsets
        .iter()
        .map(|s| combination_capacity(d, s, total_power, noise_variance))
        .collect::<Result<Vec<_>>>()?;
    let probabilities = optimal_activation(&capacities)?;
    let rate = log_sum_exp2(&capacities);
    Ok((
        rate,
        ActivationDistribution {
            subsets,
            capacities,
            probabilities,
        },
    ))
}

/// One transmit hypothesis of a signal set.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// Index into [`SignalSet::subsets`].
    pub subset_index: usize,
    /// Constellation labels, one per stream.
    pub symbols: Vec<usize>,
    pub vector: DVector<Complex64>,
}

/// Finite transmit alphabet for BM/BBS symbol-error simulation.
///
/// Candidate `i` carries the bit pattern `i` (index bits first, then one
/// constellation label per stream), so the labeling is the identity map.
#[derive(Debug, Clone)]
pub struct SignalSet {
    pub subsets: Vec<BeamSubset>,
    pub candidates: Vec<Candidate>,
    pub index_bits: u32,
    pub constellation: Constellation,
    pub bits_per_symbol: u32,
    pub total_power: f64,
}

impl SignalSet {
    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Bit pattern carried by candidate `i`, MSB first.
    pub fn label(&self, i: usize) -> Vec<bool> {
        (0..self.bits_per_symbol)
            .rev()
            .map(|b| (i >> b) & 1 == 1)
            .collect()
    }

    /// Candidate carrying the bit pattern `bits` (MSB first).
    pub fn candidate_for(&self, bits: &[bool]) -> Option<usize> {
        if bits.len() != self.bits_per_symbol as usize {
            return None;
        }
        Some(bits.iter().fold(0usize, |acc, &b| (acc << 1) | b as usize))
    }

    pub fn average_power(&self) -> f64 {
        self.candidates
            .iter()
            .map(|c| c.vector.norm_squared())
            .sum::<f64>()
            / self.len() as f64
    }
}

/// Builds the candidate set: `2^index_bits` strongest size-`k_t` beam subsets
/// (by summed eigenbeam gain, which is capacity order for single-beam subsets),
/// each carrying `k_t` constellation symbols on its right singular vectors.
pub fn build_signal_set(
    d: &BeamspaceDecomposition,
    index_bits: u32,
    constellation: Constellation,
    k_t: usize,
    total_power: f64,
) -> Result<SignalSet> {
    if k_t == 0 {
        return Err(Error::validation("transmit chain count must be at least 1"));
    }
    if !(total_power.is_finite() && total_power > 0.0) {
        return Err(Error::validation(format!(
            "total power must be positive, got {total_power}"
        )));
    }
    if k_t > d.effective_dof {
        return Err(Error::validation(format!(
            "{k_t} streams requested but only {} effective eigenbeams",
            d.effective_dof
        )));
    }
    let per_stream_bits = constellation.bits() as usize * k_t;
    let bits_per_symbol = index_bits as usize + per_stream_bits;
    if bits_per_symbol > 20 {
        return Err(Error::validation(format!(
            "{bits_per_symbol} bits per symbol is too many candidates"
        )));
    }
    let wanted = 1usize << index_bits;
    let gains = &d.gains()[..d.effective_dof];
    let subsets = enumerate_subsets(gains, k_t, Some(wanted))?;
    if subsets.len() < wanted {
        return Err(Error::validation(format!(
            "{index_bits} index bits need {wanted} beam subsets, only {} available",
            subsets.len()
        )));
    }

    let m = constellation.order();
    let per_subset = m.pow(k_t as u32);
    let amp = (total_power / k_t as f64).sqrt();
    let mut candidates = Vec::with_capacity(wanted * per_subset);
    for (si, subset) in subsets.iter().enumerate() {
        for payload in 0..per_subset {
            let symbols: Vec<usize> = (0..k_t)
                .map(|j| (payload / m.pow((k_t - 1 - j) as u32)) % m)
                .collect();
            let mut x = DVector::zeros(d.tx_elements());
            for (&beam, &sym) in subset.indices().iter().zip(&symbols) {
                x += d.right_vectors.column(beam) * (constellation.point(sym) * amp);
            }
            candidates.push(Candidate {
                subset_index: si,
                symbols,
                vector: x,
            });
        }
    }
    Ok(SignalSet {
        subsets,
        candidates,
        index_bits,
        constellation,
        bits_per_symbol: bits_per_symbol as u32,
        total_power,
    })
}
