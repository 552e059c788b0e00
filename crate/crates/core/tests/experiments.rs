use nfbm_core::experiments::{
    compute, compute_sweep, read_manifest, resolve_preset, run_config, run_preset, sweep,
    ExperimentConfig, Preset, SweepAxis,
};
use nfbm_core::Error;

fn col(t: &nfbm_core::experiments::Table, name: &str) -> Vec<f64> {
    t.values(name).into_iter().map(|v| v.unwrap()).collect()
}

#[test]
fn effective_dof_grows_as_the_user_approaches() {
    let cfg = ExperimentConfig {
        distance_m: vec![50.0, 33.0, 25.0, 20.0, 15.0, 10.0, 5.0, 2.0, 1.0],
        ..ExperimentConfig::preset(Preset::Fig3)
    };
    let dof = col(&compute(&cfg).unwrap().table, "effective_dof");
    assert!(dof.windows(2).all(|w| w[1] >= w[0]), "{dof:?}");
    assert!(dof[0] < *dof.last().unwrap());
}

#[test]
fn fig3_single_distance() {
    let cfg = resolve_preset("fig3", &["distance_m=[50.0]"]).unwrap();
    let t = compute(&cfg).unwrap().table;
    assert_eq!(t.rows.len(), 1);
    assert!(col(&t, "gain")[0] >= 0.0);
}

#[test]
fn fig2_dof_spans_near_to_far() {
    let t = compute(&ExperimentConfig::preset(Preset::Fig2))
        .unwrap()
        .table;
    let analytic = col(&t, "analytic_dof");
    let numeric = col(&t, "numeric_dof");
    assert!(analytic.windows(2).all(|w| w[1] < w[0]));
    assert!(numeric.windows(2).all(|w| w[1] <= w[0]));
    assert!((60.0..=80.0).contains(&analytic[0]));
    assert!(*analytic.last().unwrap() < 2.0);
    assert!((2.0..=3.0).contains(numeric.last().unwrap()));
}

#[test]
fn fig5_single_chain_matches_bbs() {
    // One receive chain leaves a single beam, so there is no index to modulate.
    let cfg = resolve_preset("fig5", &["k_r_values=[1, 2]"]).unwrap();
    let t = compute(&cfg).unwrap().table;
    let (bbs, bm) = (col(&t, "bbs_se"), col(&t, "bm_se"));
    assert_eq!(bm[0], bbs[0]);
    assert!(bm[1] > bbs[1]);
}

#[test]
fn sweep_k_t_keeps_bm_above_bbs() {
    let base = resolve_preset("fig3", &["distance_m=[5.0]"]).unwrap();
    let out = compute_sweep(SweepAxis::KT, &[1.0, 2.0, 3.0], &base).unwrap();
    assert!(out.failures.is_empty());
    assert_eq!(out.table.header[0], "k_t");
    let (bbs, bm) = (col(&out.table, "bbs_se"), col(&out.table, "bm_se"));
    assert_eq!(bm.len(), 3);
    assert!(bm.iter().zip(&bbs).all(|(m, b)| m >= b));
}

#[test]
fn sweep_distance_gain_rises_toward_the_array() {
    let base = ExperimentConfig::preset(Preset::Fig3);
    let out = compute_sweep(SweepAxis::Distance, &[50.0, 25.0, 10.0, 5.0, 1.0], &base).unwrap();
    assert_eq!(out.table.header[0], "distance_m");
    let gain = col(&out.table, "gain");
    assert!(gain.windows(2).all(|w| w[1] >= w[0]), "{gain:?}");
}

#[test]
fn sweep_trials_shrinks_interval_by_sqrt_ten() {
    let base = resolve_preset("fig4", &["distance_m=[5.0]"]).unwrap();
    let out = compute_sweep(SweepAxis::Trials, &[1e4, 1e5], &base).unwrap();
    let (lo, hi) = (
        col(&out.table, "bbs_ci_low"),
        col(&out.table, "bbs_ci_high"),
    );
    let ratio = (hi[0] - lo[0]) / (hi[1] - lo[1]);
    assert!(
        (ratio / 10f64.sqrt() - 1.0).abs() < 0.15,
        "width ratio {ratio}"
    );
}

#[test]
fn sweep_records_bad_values_and_continues() {
    let base = resolve_preset("fig3", &["distance_m=[5.0]"]).unwrap();
    let out = compute_sweep(SweepAxis::KR, &[2.0, 0.5, 1000.0, 4.0], &base).unwrap();
    assert_eq!(out.table.rows.len(), 2);
    assert_eq!(out.failures.len(), 2);
    assert!(out.failures.iter().all(|f| f.kind == "validation"));
    assert!(matches!(
        compute_sweep(SweepAxis::KR, &[], &base),
        Err(Error::Validation(_))
    ));
}

#[test]
fn preset_outputs_and_manifest_reconstruct_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("nested/fig3");
    let out = run_preset("fig3", &[format!("output_dir=\"{}\"", out_dir.display())]).unwrap();
    assert_eq!(out.csv_path, out_dir.join("fig3.csv"));
    let csv = std::fs::read_to_string(&out.csv_path).unwrap();
    assert!(csv.starts_with("distance_m,effective_dof,bbs_se,bm_se,gain\n"));

    let manifest = read_manifest(&out.manifest_path).unwrap();
    assert_eq!(manifest.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(manifest.seed, 1);
    assert_eq!(manifest.config_digest, manifest.config.digest());
    assert_eq!(manifest.rows, 5);
    assert_eq!(compute(&manifest.config).unwrap().table.to_csv(), csv);
}

#[test]
fn sweep_writes_its_own_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = resolve_preset("fig4", &["distance_m=[5.0]", "trials=500"]).unwrap();
    base.output_dir = dir.path().to_path_buf();
    let out = sweep(SweepAxis::SnrDb, &[10.0, 20.0], &base).unwrap();
    assert!(out.csv_path.ends_with("sweep_snr_db.csv"));
    let manifest = read_manifest(&out.manifest_path).unwrap();
    assert_eq!(manifest.sweep_axis, Some(SweepAxis::SnrDb));
    assert_eq!(manifest.sweep_values, vec![10.0, 20.0]);
    // Row i is seeded with seed + i.
    let seeds = col(&out.table, "seed");
    assert_eq!(seeds, vec![1.0, 2.0]);
}

#[test]
fn ser_falls_with_snr() {
    let base = resolve_preset("fig4", &["distance_m=[10.0]", "trials=4000"]).unwrap();
    let t = compute_sweep(SweepAxis::SnrDb, &[10.0, 20.0, 30.0], &base)
        .unwrap()
        .table;
    for scheme in ["bbs", "bm"] {
        let ser = col(&t, &format!("{scheme}_ser"));
        let lo = col(&t, &format!("{scheme}_ci_low"));
        let hi = col(&t, &format!("{scheme}_ci_high"));
        for i in 1..ser.len() {
            assert!(
                ser[i] <= ser[i - 1] || lo[i - 1] <= hi[i],
                "{scheme}: {ser:?}"
            );
        }
    }
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let mut cfg = ExperimentConfig::preset(Preset::Fig5);
    cfg.output_dir = blocker.join("sub");
    assert!(matches!(run_config(&cfg), Err(Error::Io { .. })));
}

#[test]
fn unknown_preset_lists_known_ones() {
    match run_preset::<&str>("fig7", &[]) {
        Err(Error::UnknownPreset { known, .. }) => {
            assert!(known.contains("fig2") && known.contains("fig5"))
        }
        other => panic!("{other:?}"),
    }
}
