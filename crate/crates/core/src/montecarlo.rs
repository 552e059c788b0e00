//! Monte Carlo symbol-error-rate estimation with minimum-distance (ML) detection,
//! plus the analytic spectral-efficiency comparison it is paired with.
//!
//! Every trial draws its randomness from a ChaCha stream selected by the trial
//! counter under the master seed, so results do not depend on how trials are
//! split across threads or shards.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamspace::{
    decompose, receive_combiner, BeamspaceDecomposition, DEFAULT_THRESHOLD_FRACTION,
};
use crate::channel::{awgn_sample, ChannelMatrix};
use crate::error::{Error, Result};
use crate::schemes::{bbs_rate, bm_rate, SignalSet};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Below this many errors the Wilson interval replaces the Wald interval.
const WILSON_BELOW_ERRORS: u64 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub estimate: f64,
    pub trials: u64,
    pub errors: u64,
    pub confidence_interval_95: (f64, f64),
    pub seed: u64,
    pub config_digest: String,
}

impl SimResult {
    pub fn from_counts(
        errors: u64,
        trials: u64,
        seed: u64,
        config_digest: impl Into<String>,
    ) -> Self {
        SimResult {
            estimate: errors as f64 / trials as f64,
            trials,
            errors,
            confidence_interval_95: binomial_interval(errors, trials),
            seed,
            config_digest: config_digest.into(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("SimResult serializes")
    }

    /// True when the two 95% intervals share at least one point.
    pub fn overlaps(&self, other: &SimResult) -> bool {
        self.confidence_interval_95.0 <= other.confidence_interval_95.1
            && other.confidence_interval_95.0 <= self.confidence_interval_95.1
    }
}

/// 95% interval for a binomial proportion: Wilson score when errors are rare,
/// Wald otherwise.
pub fn binomial_interval(errors: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    if errors < WILSON_BELOW_ERRORS {
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / n;
        let center = (p + z2 / (2.0 * n)) / denom;
        let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        // Wilson brackets the point estimate mathematically; pin it against rounding.
        ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
    } else {
        let half = Z95 * (p * (1.0 - p) / n).sqrt();
        ((p - half).max(0.0), (p + half).min(1.0))
    }
}

/// Index of the candidate nearest to `y`; ties go to the lowest index.
pub fn ml_detect(y: &DVector<Complex64>, candidates: &[DVector<Complex64>]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::validation("candidate list is empty"));
    }
    if let Some(bad) = candidates.iter().find(|c| c.len() != y.len()) {
        return Err(Error::validation(format!(
            "candidate dimension {} does not match observation dimension {}",
            bad.len(),
            y.len()
        )));
    }
    Ok(nearest(y, candidates))
}

fn nearest(y: &DVector<Complex64>, candidates: &[DVector<Complex64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, c) in candidates.iter().enumerate() {
        let d: f64 = y
            .iter()
            .zip(c.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        if d < best.1 {
            best = (i, d);
        }
    }
    best.0
}

/// RNG for one trial: stream `trial` of the ChaCha generator keyed by `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Precomputed link for SER trials: combiner, noiseless received candidates, and
/// their combined images.
#[derive(Debug, Clone)]
pub struct SerLink {
    combiner_h: DMatrix<Complex64>,
    effective: Vec<DVector<Complex64>>,
    rx_elements: usize,
    noise_variance: f64,
}

impl SerLink {
    pub fn new(
        channel: &ChannelMatrix,
        signal_set: &SignalSet,
        k_r: usize,
        noise_variance: f64,
    ) -> Result<Self> {
        let d = decompose(channel, DEFAULT_THRESHOLD_FRACTION)?;
        Self::with_decomposition(channel, &d, signal_set, k_r, noise_variance)
    }

    pub fn with_decomposition(
        channel: &ChannelMatrix,
        d: &BeamspaceDecomposition,
        signal_set: &SignalSet,
        k_r: usize,
        noise_variance: f64,
    ) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::validation(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        if signal_set.is_empty() {
            return Err(Error::validation("signal set is empty"));
        }
        if signal_set.candidates[0].vector.len() != channel.tx_elements() {
            return Err(Error::validation(
                "signal set does not match the channel's tx dimension",
            ));
        }
        let w = receive_combiner(d, k_r)?;
        let combiner_h = w.adjoint();
        let effective = signal_set
            .candidates
            .iter()
            .map(|c| &combiner_h * (&channel.entries * &c.vector))
            .collect();
        Ok(SerLink {
            combiner_h,
            effective,
            rx_elements: channel.rx_elements(),
            noise_variance,
        })
    }

    /// Runs one trial; true on a symbol error.
    pub fn trial(&self, seed: u64, trial: u64) -> bool {
        let mut rng = trial_rng(seed, trial);
        let sent = rng.random_range(0..self.effective.len());
        let noise = awgn_sample(self.rx_elements, self.noise_variance, &mut rng);
        let y = &self.effective[sent] + &self.combiner_h * noise;
        nearest(&y, &self.effective) != sent
    }

    /// Symbol errors over the given trial counters.
    pub fn count_errors(&self, seed: u64, trials: Range<u64>) -> u64 {
        trials
            .into_par_iter()
            .filter(|&t| self.trial(seed, t))
            .count() as u64
    }
}

pub fn run_ser(
    channel: &ChannelMatrix,
    signal_set: &SignalSet,
    k_r: usize,
    noise_variance: f64,
    trials: u64,
    seed: u64,
) -> Result<SimResult> {
    if trials == 0 {
        return Err(Error::validation("trial count must be at least 1"));
    }
    let link = SerLink::new(channel, signal_set, k_r, noise_variance)?;
    let errors = link.count_errors(seed, 0..trials);
    Ok(SimResult::from_counts(errors, trials, seed, ""))
}

/// BBS and BM spectral efficiency side by side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeGap {
    pub bbs_se: f64,
    pub bm_se: f64,
    /// `(bm - bbs) / bbs`.
    pub gain_fraction: f64,
}

/// Rates with unit transmit power and noise variance `1 / snr_linear`.
pub fn se_gap(
    d: &BeamspaceDecomposition,
    k_t: usize,
    k_r: usize,
    snr_linear: f64,
    subset_cap: Option<usize>,
) -> Result<SeGap> {
    if !(snr_linear.is_finite() && snr_linear > 0.0) {
        return Err(Error::validation(format!(
            "SNR must be positive, got {snr_linear}"
        )));
    }
    let noise = 1.0 / snr_linear;
    let bbs_se = bbs_rate(d, k_t, k_r, 1.0, noise)?;
    let (bm_se, _) = bm_rate(d, k_t, k_r, 1.0, noise, subset_cap)?;
    Ok(SeGap {
        bbs_se,
        bm_se,
        gain_fraction: (bm_se - bbs_se) / bbs_se,
    })
}

pub fn estimate_se_gap(
    channel: &ChannelMatrix,
    k_t: usize,
    k_r: usize,
    snr_linear: f64,
    subset_cap: Option<usize>,
) -> Result<SeGap> {
    let d = decompose(channel, DEFAULT_THRESHOLD_FRACTION)?;
    se_gap(&d, k_t, k_r, snr_linear, subset_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::Constellation;
    use crate::schemes::build_signal_set;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn scalar_channel(gain: f64) -> ChannelMatrix {
        ChannelMatrix::from_entries(DMatrix::from_element(1, 1, c(gain, 0.0)), 1.0, 0.01)
    }

    fn diag_channel(values: &[f64]) -> ChannelMatrix {
        let v = DVector::from_iterator(values.len(), values.iter().map(|x| c(*x, 0.0)));
        ChannelMatrix::from_entries(DMatrix::from_diagonal(&v), 1.0, 0.01)
    }

    #[test]
    fn detect_exact_candidate() {
        let cands: Vec<DVector<Complex64>> = (0..5)
            .map(|i| DVector::from_element(2, c(i as f64, 0.0)))
            .collect();
        assert_eq!(ml_detect(&cands[3].clone(), &cands).unwrap(), 3);
    }

    #[test]
    fn detect_tie_goes_low() {
        let a = DVector::from_element(1, c(1.0, 0.0));
        let cands = vec![DVector::from_element(1, c(5.0, 0.0)), a.clone(), a.clone()];
        assert_eq!(
            ml_detect(&DVector::from_element(1, c(1.2, 0.0)), &cands).unwrap(),
            1
        );
    }

    #[test]
    fn detect_bpsk() {
        let cands = vec![
            DVector::from_element(1, c(1.0, 0.0)),
            DVector::from_element(1, c(-1.0, 0.0)),
        ];
        assert_eq!(
            ml_detect(&DVector::from_element(1, c(0.2, 0.0)), &cands).unwrap(),
            0
        );
    }

    #[test]
    fn detect_errors() {
        let y = DVector::from_element(2, c(0.0, 0.0));
        assert!(ml_detect(&y, &[]).is_err());
        assert!(ml_detect(&y, &[DVector::from_element(3, c(0.0, 0.0))]).is_err());
    }

    #[test]
    fn noiseless_link_has_no_errors() {
        let h = diag_channel(&[2.0, 1.5, 1.0, 0.7]);
        let d = decompose(&h, 0.01).unwrap();
        let set = build_signal_set(&d, 2, Constellation::Qpsk, 1, 1.0).unwrap();
        let r = run_ser(&h, &set, 4, 0.0, 2000, 3).unwrap();
        assert_eq!(r.errors, 0);
        assert_eq!(r.estimate, 0.0);
    }

    #[test]
    fn same_seed_same_result() {
        let h = diag_channel(&[1.0, 0.8]);
        let d = decompose(&h, 0.01).unwrap();
        let set = build_signal_set(&d, 1, Constellation::Qpsk, 1, 1.0).unwrap();
        let a = run_ser(&h, &set, 2, 0.3, 20_000, 42).unwrap();
        let b = run_ser(&h, &set, 2, 0.3, 20_000, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.errors > 0);
        let other = run_ser(&h, &set, 2, 0.3, 20_000, 43).unwrap();
        assert_ne!(a.errors, other.errors);
    }

    #[test]
    fn shards_merge_to_the_full_run() {
        let h = diag_channel(&[1.0, 0.6]);
        let d = decompose(&h, 0.01).unwrap();
        let set = build_signal_set(&d, 1, Constellation::Bpsk, 1, 1.0).unwrap();
        let link = SerLink::new(&h, &set, 2, 0.5).unwrap();
        let whole = link.count_errors(7, 0..30_000);
        let parts = link.count_errors(7, 0..1)
            + link.count_errors(7, 1..12_345)
            + link.count_errors(7, 12_345..30_000);
        assert_eq!(whole, parts);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        assert_eq!(pool.install(|| link.count_errors(7, 0..30_000)), whole);
    }

    #[test]
    fn zero_trials_rejected() {
        let h = scalar_channel(1.0);
        let d = decompose(&h, 0.01).unwrap();
        let set = build_signal_set(&d, 0, Constellation::Bpsk, 1, 1.0).unwrap();
        assert!(matches!(
            run_ser(&h, &set, 1, 0.1, 0, 1),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn intervals_contain_estimate_and_shrink() {
        for (e, n) in [
            (0, 100),
            (3, 1000),
            (29, 10_000),
            (30, 10_000),
            (500, 1000),
            (1000, 1000),
        ] {
            let (lo, hi) = binomial_interval(e, n);
            let p = e as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{e}/{n}: ({lo}, {hi})");
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
        let narrow = binomial_interval(1000, 100_000);
        let wide = binomial_interval(100, 10_000);
        let ratio = (wide.1 - wide.0) / (narrow.1 - narrow.0);
        assert!((ratio - 10f64.sqrt()).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn sim_result_json_has_all_fields() {
        let r = SimResult::from_counts(3, 100, 9, "abc");
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in [
            "estimate",
            "trials",
            "errors",
            "confidence_interval_95",
            "seed",
            "config_digest",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: SimResult = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn rank_one_gap_is_zero() {
        let h = ChannelMatrix::from_entries(DMatrix::from_element(3, 2, c(0.5, 0.5)), 1.0, 0.01);
        let g = estimate_se_gap(&h, 1, 3, 100.0, None).unwrap();
        assert_eq!(g.gain_fraction, 0.0);
        assert_eq!(g.bm_se, g.bbs_se);
    }

    #[test]
    fn larger_cap_never_lowers_bm() {
        let h = diag_channel(&[2.0, 1.8, 1.5, 1.2, 1.0, 0.9]);
        let mut prev = 0.0;
        for cap in [1, 2, 4, 8, 16] {
            let g = estimate_se_gap(&h, 2, 6, 10.0, Some(cap)).unwrap();
            assert!(g.bm_se >= prev);
            prev = g.bm_se;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn ser_estimate_is_a_probability(seed in 0u64..1000, noise in 0.01f64..3.0) {
            let h = diag_channel(&[1.0, 0.7, 0.4]);
            let d = decompose(&h, 0.01).unwrap();
            let set = build_signal_set(&d, 1, Constellation::Qpsk, 1, 1.0).unwrap();
            let r = run_ser(&h, &set, 3, noise, 500, seed).unwrap();
            prop_assert!(r.errors <= r.trials);
            prop_assert!((0.0..=1.0).contains(&r.estimate));
            prop_assert!(r.confidence_interval_95.0 <= r.estimate && r.estimate <= r.confidence_interval_95.1);
        }
    }
}
