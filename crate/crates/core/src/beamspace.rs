//! Beamspace view of a channel: eigenbeams from the SVD, waterfilling over
//! eigenbeam gains, beam-subset enumeration and receive combining.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::dof::effective_dof;
use crate::error::{Error, Result};

/// Default relative singular-value cut for counting usable eigenbeams.
pub const DEFAULT_THRESHOLD_FRACTION: f64 = 0.01;

/// Default limit on the number of enumerated beam subsets.
pub const DEFAULT_SUBSET_CAP: usize = 1024;

/// Largest `C(N, K)` that may be enumerated without an explicit cap.
pub const UNCAPPED_ENUMERATION_BOUND: usize = 1 << 16;

/// Singular-value decomposition `H = U diag(sigma) V^H` with sorted singular values.
#[derive(Debug, Clone)]
pub struct BeamspaceDecomposition {
    /// `rx_elements x N_full`, orthonormal columns.
    pub left_vectors: DMatrix<Complex64>,
    /// Non-increasing, length `N_full = min(rx, tx)`.
    pub singular_values: Vec<f64>,
    /// `tx_elements x N_full`, orthonormal columns.
    pub right_vectors: DMatrix<Complex64>,
    pub effective_dof: usize,
}

impl BeamspaceDecomposition {
    pub fn rx_elements(&self) -> usize {
        self.left_vectors.nrows()
    }

    pub fn tx_elements(&self) -> usize {
        self.right_vectors.nrows()
    }

    pub fn full_rank(&self) -> usize {
        self.singular_values.len()
    }

    /// Eigenbeam power gains `sigma_k^2`.
    pub fn gains(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s * s).collect()
    }

    /// `U diag(sigma) V^H`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let mut scaled = self.left_vectors.clone();
        for (k, s) in self.singular_values.iter().enumerate() {
            scaled.column_mut(k).scale_mut(*s);
        }
        scaled * self.right_vectors.adjoint()
    }
}

pub fn decompose(h: &ChannelMatrix, threshold_fraction: f64) -> Result<BeamspaceDecomposition> {
    decompose_matrix(&h.entries, threshold_fraction)
}

/// Same as [`decompose`] for a bare complex matrix.
pub fn decompose_matrix(
    h: &DMatrix<Complex64>,
    threshold_fraction: f64,
) -> Result<BeamspaceDecomposition> {
    if h.is_empty() {
        return Err(Error::validation("channel matrix is empty"));
    }
    if h.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::validation("channel matrix has non-finite entries"));
    }
    if h.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Err(Error::DegenerateChannel(
            "channel matrix is identically zero".into(),
        ));
    }

    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v = svd.v_t.expect("right singular vectors requested").adjoint();
    let sv = svd.singular_values;

    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut left = DMatrix::zeros(u.nrows(), order.len());
    let mut right = DMatrix::zeros(v.nrows(), order.len());
    let mut singular_values = Vec::with_capacity(order.len());
    for (k, &src) in order.iter().enumerate() {
        let mut uk = u.column(src).into_owned();
        let mut vk = v.column(src).into_owned();
        // Pin the phase: largest-magnitude entry of the right vector becomes real positive.
        let pivot = vk
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, z)| {
                if z.norm() > best.1 {
                    (i, z.norm())
                } else {
                    best
                }
            })
            .0;
        let rot = Complex64::from_polar(1.0, -vk[pivot].arg());
        uk *= rot;
        vk *= rot;
        vk[pivot] = Complex64::new(vk[pivot].re, 0.0);
        left.set_column(k, &uk);
        right.set_column(k, &vk);
        singular_values.push(sv[src].max(0.0));
    }

    let effective_dof = effective_dof(&singular_values, threshold_fraction)?;
    Ok(BeamspaceDecomposition {
        left_vectors: left,
        singular_values,
        right_vectors: right,
        effective_dof,
    })
}

/// Capacity-optimal power split over parallel channels with power gains `gains`.
///
/// Returns `q` with `q_k = max(0, mu - noise / g_k)` and `sum q = total_power`.
pub fn waterfill(gains: &[f64], total_power: f64, noise_variance: f64) -> Result<Vec<f64>> {
    if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::validation(
            "channel gains must be finite and non-negative",
        ));
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
    let mut order: Vec<usize> = (0..gains.len()).filter(|&i| gains[i] > 0.0).collect();
    if order.is_empty() {
        return Err(Error::DegenerateChannel(
            "all channel gains are zero".into(),
        ));
    }
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));

    // Grow the active set strongest-first until the next floor sits above the water.
    let mut floor_sum = 0.0;
    let mut level = 0.0;
    let mut active = 0;
    for (m, &i) in order.iter().enumerate() {
        let floor = noise_variance / gains[i];
        let candidate = (total_power + floor_sum + floor) / (m as f64 + 1.0);
        if m > 0 && candidate <= floor {
            break;
        }
        floor_sum += floor;
        level = candidate;
        active = m + 1;
    }

    let mut q = vec![0.0; gains.len()];
    for &i in &order[..active] {
        q[i] = (level - noise_variance / gains[i]).max(0.0);
    }
    // Remove rounding drift so the budget is met exactly.
    let sum: f64 = q.iter().sum();
    if sum > 0.0 {
        let fix = total_power / sum;
        q.iter_mut().for_each(|x| *x *= fix);
    }
    Ok(q)
}

/// `sum log2(1 + q_k g_k / noise)` with waterfilled `q`; zero when every gain is zero.
pub fn subset_capacity(gains: &[f64], total_power: f64, noise_variance: f64) -> Result<f64> {
    if gains.iter().all(|g| *g == 0.0) {
        return Ok(0.0);
    }
    let q = waterfill(gains, total_power, noise_variance)?;
    Ok(gains
        .iter()
        .zip(&q)
        .map(|(g, p)| (1.0 + p * g / noise_variance).log2())
        .sum())
}

/// A set of eigenbeam indices, stored strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeamSubset(Vec<usize>);

impl BeamSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::validation("beam subset is empty"));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation(format!(
                "beam subset indices must be strictly increasing, got {indices:?}"
            )));
        }
        Ok(BeamSubset(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::fmt::Display for BeamSubset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

pub fn combination_capacity(
    d: &BeamspaceDecomposition,
    subset: &BeamSubset,
    total_power: f64,
    noise_variance: f64,
) -> Result<f64> {
    if let Some(&bad) = subset.indices().iter().find(|&&i| i >= d.full_rank()) {
        return Err(Error::validation(format!(
            "beam index {bad} out of range for {} eigenbeams",
            d.full_rank()
        )));
    }
    let gains: Vec<f64> = subset
        .indices()
        .iter()
        .map(|&i| d.singular_values[i] * d.singular_values[i])
        .collect();
    subset_capacity(&gains, total_power, noise_variance)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| {
        acc.saturating_mul((n - i) as u128) / (i as u128 + 1)
    })
}

#[derive(PartialEq)]
struct Candidate {
    weight: f64,
    indices: Vec<usize>,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    // Heavier first; equal weights pop in lexicographic index order.
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight
            .total_cmp(&other.weight)
            .then_with(|| other.indices.cmp(&self.indices))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Size-`k` subsets of `0..gains.len()` in decreasing order of summed gain.
///
/// `gains` must be non-increasing (eigenbeam order). Ties are broken by the
/// lexicographic order of the index lists. At most `cap` subsets are returned;
/// with no cap, `C(N, k)` must not exceed [`UNCAPPED_ENUMERATION_BOUND`].
pub fn enumerate_subsets(gains: &[f64], k: usize, cap: Option<usize>) -> Result<Vec<BeamSubset>> {
    let n = gains.len();
    if k == 0 {
        return Err(Error::validation("subset size must be at least 1"));
    }
    if k > n {
        return Err(Error::validation(format!(
            "subset size {k} exceeds the {n} available beams"
        )));
    }
    if gains.iter().any(|g| !(g.is_finite() && *g >= 0.0)) || gains.windows(2).any(|w| w[1] > w[0])
    {
        return Err(Error::validation(
            "beam gains must be non-negative and non-increasing",
        ));
    }
    let total = binomial(n, k);
    let limit = match cap {
        Some(0) => return Err(Error::validation("subset cap must be positive")),
        Some(c) => c,
        None if total > UNCAPPED_ENUMERATION_BOUND as u128 => {
            return Err(Error::CapRequired {
                n,
                k,
                count: total,
                bound: UNCAPPED_ENUMERATION_BOUND,
            })
        }
        None => usize::MAX,
    };
    let limit = (limit as u128).min(total) as usize;

    let weight = |idx: &[usize]| idx.iter().map(|&i| gains[i]).sum::<f64>();

    // Best-first walk: every subset is reached from the top-k one by bumping single
    // indices, and bumping never increases the weight.
    let start: Vec<usize> = (0..k).collect();
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    seen.insert(start.clone());
    heap.push(Candidate {
        weight: weight(&start),
        indices: start,
    });

    let mut out = Vec::with_capacity(limit.min(4096));
    while out.len() < limit {
        let Some(Candidate { indices, .. }) = heap.pop() else {
            break;
        };
        for j in 0..k {
            let next_bound = if j + 1 < k { indices[j + 1] } else { n };
            if indices[j] + 1 < next_bound {
                let mut succ = indices.clone();
                succ[j] += 1;
                if seen.insert(succ.clone()) {
                    heap.push(Candidate {
                        weight: weight(&succ),
                        indices: succ,
                    });
                }
            }
        }
        out.push(BeamSubset(indices));
    }
    Ok(out)
}

/// Completes the orthonormal columns of `basis` to `target` columns using
/// Gram-Schmidt on the standard basis.
fn complete_basis(basis: &DMatrix<Complex64>, target: usize) -> DMatrix<Complex64> {
    let rows = basis.nrows();
    let mut cols: Vec<DVector<Complex64>> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while cols.len() < target && e < rows {
        let mut v = DVector::zeros(rows);
        v[e] = Complex64::new(1.0, 0.0);
        e += 1;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dotc(&v);
                v -= c * proj;
            }
        }
        let norm = v.norm();
        if norm > 1e-6 {
            cols.push(v / Complex64::from(norm));
        }
    }
    DMatrix::from_columns(&cols)
}

/// The first `k_r` left singular vectors (completed to a full basis past `N_full`).
pub fn receive_combiner(d: &BeamspaceDecomposition, k_r: usize) -> Result<DMatrix<Complex64>> {
    if k_r == 0 || k_r > d.rx_elements() {
        return Err(Error::validation(format!(
            "receive chain count {k_r} must lie in 1..={}",
            d.rx_elements()
        )));
    }
    if k_r <= d.full_rank() {
        Ok(d.left_vectors.columns(0, k_r).into_owned())
    } else {
        Ok(complete_basis(&d.left_vectors, k_r))
    }
}
