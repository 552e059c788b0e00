use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Metric, SnrReference};
use crate::beamspace::{decompose, BeamspaceDecomposition};
use crate::channel::{spherical_los_channel, ChannelMatrix};
use crate::dof::{analytic_dof, threshold_distance};
use crate::error::{Error, Result};
use crate::geometry::{fraunhofer_distance, ApertureConvention};
use crate::montecarlo::{se_gap, SerLink, SimResult};
use crate::schemes::{build_signal_set, surviving_beams};

/// A rectangular result table; every cell is already formatted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).unwrap();
        for row in &self.rows {
            w.write_record(row).unwrap();
        }
        String::from_utf8(w.into_inner().unwrap()).unwrap()
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Cell `name` of every row parsed as f64 (`None` for empty cells).
    pub fn values(&self, name: &str) -> Vec<Option<f64>> {
        let Some(c) = self.column(name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[c].parse().ok()).collect()
    }
}

/// A row that could not be computed (fully or partly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowFailure {
    pub row: String,
    pub kind: String,
    pub message: String,
}

impl RowFailure {
    fn new(row: impl Into<String>, e: &Error) -> Self {
        RowFailure {
            row: row.into(),
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

/// Table plus everything collected while filling it.
#[derive(Debug, Clone, PartialEq)]
pub struct Computed {
    pub table: Table,
    pub failures: Vec<RowFailure>,
    pub notes: BTreeMap<String, f64>,
}

fn header(metric: Metric) -> Vec<&'static str> {
    match metric {
        Metric::Dof => vec!["distance_m", "analytic_dof", "numeric_dof"],
        Metric::Se => vec!["distance_m", "effective_dof", "bbs_se", "bm_se", "gain"],
        Metric::Ser => vec![
            "distance_m",
            "effective_dof",
            "seed",
            "trials",
            "bbs_ser",
            "bbs_errors",
            "bbs_ci_low",
            "bbs_ci_high",
            "bm_ser",
            "bm_errors",
            "bm_ci_low",
            "bm_ci_high",
        ],
        Metric::RfChains => vec![
            "distance_m",
            "k_r",
            "effective_dof",
            "surviving_beams",
            "bbs_se",
            "bm_se",
            "gain",
        ],
    }
}

pub fn channel_at(cfg: &ExperimentConfig, distance: f64) -> Result<ChannelMatrix> {
    spherical_los_channel(
        &cfg.tx_geometry()?,
        &cfg.rx_geometry(distance)?,
        cfg.channel_normalization(),
    )
}

/// Noise variance for unit total transmit power.
pub fn noise_variance(cfg: &ExperimentConfig) -> Result<f64> {
    let snr = cfg.snr_linear();
    match cfg.snr_reference {
        SnrReference::Element => Ok(1.0 / snr),
        SnrReference::Received => {
            let reference = channel_at(cfg, cfg.calibration_distance_m)?;
            Ok(reference.frobenius_norm().powi(2) / snr)
        }
    }
}

fn decomposition_at(
    cfg: &ExperimentConfig,
    distance: f64,
) -> Result<(ChannelMatrix, BeamspaceDecomposition)> {
    let h = channel_at(cfg, distance)?;
    let d = decompose(&h, cfg.dof_threshold_fraction)?;
    Ok((h, d))
}

/// Rows produced for one distance, plus failures that did not void the whole row.
struct Outcome {
    rows: Vec<Vec<String>>,
    partial: Vec<Error>,
}

impl Outcome {
    fn row(cells: Vec<String>) -> Self {
        Outcome {
            rows: vec![cells],
            partial: Vec::new(),
        }
    }
}

fn dof_row(cfg: &ExperimentConfig, r: f64) -> Result<Outcome> {
    let (tx, rx) = (cfg.tx_geometry()?, cfg.rx_geometry(r)?);
    let conv = cfg.aperture_convention;
    let analytic = analytic_dof(r, cfg.wavelength(), tx.aperture(conv), rx.aperture(conv))?;
    let (_, d) = decomposition_at(cfg, r)?;
    Ok(Outcome::row(vec![
        r.to_string(),
        analytic.to_string(),
        d.effective_dof.to_string(),
    ]))
}

fn se_row(cfg: &ExperimentConfig, r: f64) -> Result<Outcome> {
    let (_, d) = decomposition_at(cfg, r)?;
    let snr = 1.0 / noise_variance(cfg)?;
    let gap = se_gap(&d, cfg.k_t, cfg.k_r, snr, cfg.subset_cap())?;
    Ok(Outcome::row(vec![
        r.to_string(),
        d.effective_dof.to_string(),
        gap.bbs_se.to_string(),
        gap.bm_se.to_string(),
        gap.gain_fraction.to_string(),
    ]))
}

fn ser_cells(res: Result<SimResult>) -> (Vec<String>, Option<Error>) {
    match res {
        Ok(s) => (
            vec![
                s.estimate.to_string(),
                s.errors.to_string(),
                s.confidence_interval_95.0.to_string(),
                s.confidence_interval_95.1.to_string(),
            ],
            None,
        ),
        Err(e) => (vec![String::new(); 4], Some(e)),
    }
}

fn ser_row(cfg: &ExperimentConfig, r: f64, seed: u64) -> Result<Outcome> {
    let (h, d) = decomposition_at(cfg, r)?;
    let noise = noise_variance(cfg)?;
    let digest = cfg.digest();
    let simulate = |index_bits, constellation| -> Result<SimResult> {
        let set = build_signal_set(&d, index_bits, constellation, cfg.k_t, 1.0)?;
        let link = SerLink::with_decomposition(&h, &d, &set, cfg.k_r, noise)?;
        let errors = link.count_errors(seed, 0..cfg.trials);
        Ok(SimResult::from_counts(
            errors,
            cfg.trials,
            seed,
            digest.clone(),
        ))
    };
    let (bbs, bbs_err) =
        ser_cells(simulate(0, cfg.bbs_constellation).map_err(|e| prefix("bbs", e)));
    let (bm, bm_err) =
        ser_cells(simulate(cfg.bm_index_bits, cfg.bm_constellation).map_err(|e| prefix("bm", e)));
    let mut cells = vec![
        r.to_string(),
        d.effective_dof.to_string(),
        seed.to_string(),
        cfg.trials.to_string(),
    ];
    cells.extend(bbs);
    cells.extend(bm);
    Ok(Outcome {
        rows: vec![cells],
        partial: bbs_err.into_iter().chain(bm_err).collect(),
    })
}

fn prefix(scheme: &str, e: Error) -> Error {
    match e {
        Error::Validation(m) => Error::Validation(format!("{scheme}: {m}")),
        other => other,
    }
}

fn rf_chain_rows(cfg: &ExperimentConfig, r: f64) -> Result<Outcome> {
    let (_, d) = decomposition_at(cfg, r)?;
    let snr = 1.0 / noise_variance(cfg)?;
    let k_values: Vec<usize> = if cfg.k_r_values.is_empty() {
        (1..=(d.effective_dof + 4).min(d.rx_elements())).collect()
    } else {
        cfg.k_r_values.clone()
    };
    let mut out = Outcome {
        rows: Vec::new(),
        partial: Vec::new(),
    };
    for k_r in k_values {
        let row = surviving_beams(&d, k_r).and_then(|beams| {
            let gap = se_gap(&d, cfg.k_t, k_r, snr, cfg.subset_cap())?;
            Ok(vec![
                r.to_string(),
                k_r.to_string(),
                d.effective_dof.to_string(),
                beams.to_string(),
                gap.bbs_se.to_string(),
                gap.bm_se.to_string(),
                gap.gain_fraction.to_string(),
            ])
        });
        match row {
            Ok(cells) => out.rows.push(cells),
            Err(e) => out
                .partial
                .push(Error::Validation(format!("k_r = {k_r}: {e}"))),
        }
    }
    Ok(out)
}

fn evaluate(cfg: &ExperimentConfig, metric: Metric, r: f64, seed: u64) -> Result<Outcome> {
    match metric {
        Metric::Dof => dof_row(cfg, r),
        Metric::Se => se_row(cfg, r),
        Metric::Ser => ser_row(cfg, r, seed),
        Metric::RfChains => rf_chain_rows(cfg, r),
    }
}

/// Seed of the `index`-th row of a run keyed by `master`.
pub fn row_seed(master: u64, index: usize) -> u64 {
    master.wrapping_add(index as u64)
}

/// One unit of work: a config (already specialised) at a single distance.
struct Job {
    label: String,
    prefix: Vec<String>,
    cfg: ExperimentConfig,
    metric: Metric,
    distance: f64,
    seed: u64,
}

fn run_jobs(header: Vec<String>, jobs: Vec<Job>) -> (Table, Vec<RowFailure>) {
    // Rows are computed in parallel; ordering and output stay with the caller.
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|j| evaluate(&j.cfg, j.metric, j.distance, j.seed))
        .collect();
    let mut table = Table {
        header,
        rows: Vec::new(),
    };
    let mut failures = Vec::new();
    for (job, outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(o) => {
                for cells in o.rows {
                    table
                        .rows
                        .push(job.prefix.iter().cloned().chain(cells).collect());
                }
                failures.extend(
                    o.partial
                        .iter()
                        .map(|e| RowFailure::new(job.label.clone(), e)),
                );
            }
            Err(e) => failures.push(RowFailure::new(job.label.clone(), &e)),
        }
    }
    (table, failures)
}

/// Reference quantities for the configured geometry that do not depend on the grid.
pub fn geometry_notes(cfg: &ExperimentConfig) -> Result<BTreeMap<String, f64>> {
    let tx = cfg.tx_geometry()?;
    let rx = cfg.rx_geometry(cfg.distance_m[0])?;
    let lambda = cfg.wavelength();
    let mut notes = BTreeMap::new();
    notes.insert("wavelength_m".to_string(), lambda);
    for (name, conv) in [
        ("span", ApertureConvention::Span),
        ("count", ApertureConvention::Count),
    ] {
        let (lt, lr) = (tx.aperture(conv), rx.aperture(conv));
        notes.insert(format!("tx_aperture_{name}_m"), lt);
        notes.insert(format!("rx_aperture_{name}_m"), lr);
        notes.insert(
            format!("fraunhofer_distance_{name}_m"),
            fraunhofer_distance(lt.max(lr), lambda)?,
        );
        if let Ok(r) = threshold_distance(cfg.dof_xi, lambda, lt, lr) {
            notes.insert(format!("threshold_distance_xi_{}_{name}_m", cfg.dof_xi), r);
        }
    }
    Ok(notes)
}

/// Computes a config's table without touching the filesystem.
pub fn compute(cfg: &ExperimentConfig) -> Result<Computed> {
    cfg.validate()?;
    let jobs = cfg
        .distance_m
        .iter()
        .enumerate()
        .map(|(i, &r)| Job {
            label: format!("distance_m={r}"),
            prefix: Vec::new(),
            cfg: cfg.clone(),
            metric: cfg.metric,
            distance: r,
            seed: row_seed(cfg.seed, i),
        })
        .collect();
    let header = header(cfg.metric).into_iter().map(String::from).collect();
    let (table, failures) = run_jobs(header, jobs);
    Ok(Computed {
        table,
        failures,
        notes: geometry_notes(cfg)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Distance,
    SnrDb,
    KR,
    KT,
    Trials,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Distance => "distance",
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::KR => "k_r",
            SweepAxis::KT => "k_t",
            SweepAxis::Trials => "trials",
        }
    }

    fn apply(self, base: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut cfg = base.clone();
        let count = || -> Result<u64> {
            if value >= 1.0 && value.fract() == 0.0 && value < 2f64.powi(53) {
                Ok(value as u64)
            } else {
                Err(Error::validation(format!(
                    "{} must be a positive integer, got {value}",
                    self.name()
                )))
            }
        };
        match self {
            SweepAxis::Distance => cfg.distance_m = vec![value],
            SweepAxis::SnrDb => cfg.snr_db = value,
            SweepAxis::KR => cfg.k_r = count()? as usize,
            SweepAxis::KT => cfg.k_t = count()? as usize,
            SweepAxis::Trials => cfg.trials = count()?,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepAxis::Distance,
            SweepAxis::SnrDb,
            SweepAxis::KR,
            SweepAxis::KT,
            SweepAxis::Trials,
        ]
        .into_iter()
        .find(|a| a.name() == s)
        .ok_or_else(|| {
            Error::validation(format!(
                "unknown sweep axis {s:?}; expected distance, snr_db, k_r, k_t or trials"
            ))
        })
    }
}

/// Evaluates `base` once per value of `axis`. Values that make the config
/// invalid are recorded as failures and skipped.
pub fn compute_sweep(axis: SweepAxis, values: &[f64], base: &ExperimentConfig) -> Result<Computed> {
    base.validate()?;
    if values.is_empty() {
        return Err(Error::validation("sweep needs at least one value"));
    }
    // The receive-chain grid of rf_chains is itself a sweep; sweeping any axis
    // on top of it reports plain spectral efficiency.
    let metric = match base.metric {
        Metric::RfChains => Metric::Se,
        m => m,
    };
    let mut jobs = Vec::new();
    let mut failures = Vec::new();
    for &v in values {
        let label = format!("{axis}={v}");
        match axis.apply(base, v) {
            Ok(cfg) => {
                for &r in &cfg.distance_m {
                    let seed = row_seed(base.seed, jobs.len());
                    jobs.push(Job {
                        label: if axis == SweepAxis::Distance {
                            label.clone()
                        } else {
                            format!("{label}, distance_m={r}")
                        },
                        prefix: if axis == SweepAxis::Distance {
                            Vec::new()
                        } else {
                            vec![v.to_string()]
                        },
                        cfg: cfg.clone(),
                        metric,
                        distance: r,
                        seed,
                    });
                }
            }
            Err(e) => failures.push(RowFailure::new(label, &e)),
        }
    }
    let mut cols: Vec<String> = header(metric).into_iter().map(String::from).collect();
    if axis != SweepAxis::Distance {
        cols.insert(0, axis.name().to_string());
    }
    let (table, mut row_failures) = run_jobs(cols, jobs);
    failures.append(&mut row_failures);
    Ok(Computed {
        table,
        failures,
        notes: geometry_notes(base)?,
    })
}
