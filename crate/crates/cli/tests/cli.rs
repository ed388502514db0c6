//! End-to-end checks of the `snlse` binary: artifact round trips,
//! determinism, and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_snlse")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("snlse-test-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

const SMALL_SIM: &str = "\
[lattice]
dimension = 1
eta_c = 1.5
box_length = 1.0

[cap]
kind = table
shell.0 = 1.0
shell.1 = 0.5

[params]
lambda = 0.0
beta = 1.0
mu = 1.0
nu = 10.0
policy = reflect

[run]
dt = 1.0e-4
total_steps = 1200000
stride = 10
trajectories = 2
seed = 7
oracle_samples = 60000
trace_samples = 200
";

#[test]
fn describe_prints_and_round_trips_the_lattice_table() {
    let dir = scratch("describe");
    let out = run(&[
        "describe",
        "--config",
        config_dir().join("fig2.cfg").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("3 modes"), "{stdout}");

    let table = fs::read_to_string(dir.join("lattice.csv")).unwrap();
    let rows = snlse_core::csvio::parse_lattice_table(&table).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[1].0, vec![0]); // lexicographic: -1, 0, 1
    assert_eq!(rows[1].2, 1.0);
}

#[test]
fn simulate_emits_parseable_deterministic_artifacts() {
    let dir = scratch("simulate");
    let cfg = write_cfg(&dir, "sim.cfg", SMALL_SIM);
    let out1 = dir.join("run1");
    let out2 = dir.join("run2");
    for out in [&out1, &out2] {
        let r = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--with-oracle",
            "--emit-plot-data",
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }

    // artifacts parse back into the structures that produced them
    for i in 0..3 {
        let text = fs::read_to_string(out1.join(format!("hist_mode_{i}.csv"))).unwrap();
        let hist = snlse_core::csvio::parse_histogram(&text).unwrap();
        let total: f64 = hist.masses.iter().sum();
        assert!((total - 1.0).abs() < 1e-9, "mode {i} mass {total}");
        let paired = fs::read_to_string(out1.join(format!("paired_mode_{i}.csv"))).unwrap();
        assert!(paired.starts_with("bin_left,bin_right,sim_mass,oracle_mass"));
    }
    let events =
        snlse_core::csvio::parse_event_log(&fs::read_to_string(out1.join("events.csv")).unwrap())
            .unwrap();
    assert_eq!(events.reflects.len(), 3);
    assert_eq!(events.breaks.iter().sum::<u64>(), 0); // reflecting policy

    let trace =
        snlse_core::csvio::parse_trace(&fs::read_to_string(out1.join("trace.csv")).unwrap())
            .unwrap();
    assert_eq!(trace.len(), 200 * 3); // trace_samples x modes
    assert!(trace.iter().all(|r| r.abs <= 1.0 + 1e-12));

    // identical config + seed => byte-identical outputs
    for name in [
        "hist_mode_0.csv",
        "hist_mode_1.csv",
        "hist_mode_2.csv",
        "events.csv",
        "summary.txt",
        "oracle_mode_0.csv",
    ] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    // --seed overrides the configured seed and changes the byte stream
    let out3 = dir.join("run3");
    let r = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out3.to_str().unwrap(),
        "--seed",
        "8",
    ]);
    assert!(r.status.success());
    let a = fs::read(out1.join("hist_mode_0.csv")).unwrap();
    let b = fs::read(out3.join("hist_mode_0.csv")).unwrap();
    assert_ne!(a, b, "different seeds must differ");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = scratch("threads");
    let cfg = write_cfg(&dir, "sim.cfg", SMALL_SIM);
    let out1 = dir.join("t1");
    let out2 = dir.join("t2");
    for (out, threads) in [(&out1, "1"), (&out2, "2")] {
        let r = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    assert_eq!(
        fs::read(out1.join("hist_mode_0.csv")).unwrap(),
        fs::read(out2.join("hist_mode_0.csv")).unwrap()
    );
}

#[test]
fn budget_too_small_is_a_config_error() {
    let dir = scratch("budget");
    let cfg = write_cfg(
        &dir,
        "tiny.cfg",
        &SMALL_SIM.replace("total_steps = 1200000", "total_steps = 0"),
    );
    let r = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8(r.stderr).unwrap();
    assert!(err.contains("budget too small"), "{err}");
}

#[test]
fn unknown_and_invalid_keys_are_all_reported() {
    let dir = scratch("badkeys");
    let cfg = write_cfg(
        &dir,
        "bad.cfg",
        "[meanfield]\ndimension = 3\nm = 0.5\ncoupling = oops\nbeta_v = 1000\npolicy = reflect\ntypo_key = 1\n[cap]\nkind = linear\nalpha0 = 1.0\nk_max = 1.0\n",
    );
    let r = run(&[
        "meanfield",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8(r.stderr).unwrap();
    assert!(err.contains("coupling"), "{err}");
    assert!(err.contains("typo_key"), "{err}");
}

#[test]
fn oracle_with_wavebreak_policy_is_rejected() {
    let dir = scratch("oracle-policy");
    let cfg = write_cfg(
        &dir,
        "wb.cfg",
        &SMALL_SIM.replace("policy = reflect", "policy = wavebreak"),
    );
    let r = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
        "--with-oracle",
    ]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn oversized_step_is_a_numerical_failure() {
    let dir = scratch("bigdt");
    let cfg = write_cfg(&dir, "dt.cfg", &SMALL_SIM.replace("dt = 1.0e-4", "dt = 1.0e-1"));
    let r = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(3));
    let err = String::from_utf8(r.stderr).unwrap();
    assert!(err.contains("reduce dt"), "{err}");
}

#[test]
fn meanfield_and_scan_artifacts_round_trip() {
    let dir = scratch("mf");
    let r = run(&[
        "meanfield",
        "--config",
        config_dir().join("mf_reflect.cfg").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = snlse_core::csvio::parse_branch_rows(
        &fs::read_to_string(dir.join("branches.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows.iter().filter(|r| r.5).count(), 1, "one selected branch");
    assert!(rows.iter().all(|r| r.4.is_some()), "reflect rows carry free energy");

    let dir2 = scratch("scanwb");
    let r = run(&[
        "scan",
        "--config",
        config_dir().join("scan_wavebreak.cfg").to_str().unwrap(),
        "--out",
        dir2.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = snlse_core::csvio::parse_branch_rows(
        &fs::read_to_string(dir2.join("scan.csv")).unwrap(),
    )
    .unwrap();
    assert!(rows.iter().all(|r| r.4.is_none()), "wave-break rows have no free energy");
    assert!(rows.iter().all(|r| !r.5), "wave-break branches are never selected");
    let summary = fs::read_to_string(dir2.join("summary.txt")).unwrap();
    assert!(summary.contains("no transition detected"), "{summary}");
}

#[test]
fn infrared_reports_verdict_and_round_trips() {
    let dir = scratch("ir");
    let r = run(&[
        "infrared",
        "--config",
        config_dir().join("infrared_d2.cfg").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let summary = fs::read_to_string(dir.join("summary.txt")).unwrap();
    assert!(summary.contains("verdict: divergent"), "{summary}");
    let table = snlse_core::csvio::parse_infrared_table(
        &fs::read_to_string(dir.join("infrared.csv")).unwrap(),
    )
    .unwrap();
    assert_eq!(table.len(), 7);
}

#[test]
fn run_config_records_resolved_configuration() {
    let dir = scratch("record");
    let r = run(&[
        "meanfield",
        "--config",
        config_dir().join("mf_reflect.cfg").to_str().unwrap(),
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(r.status.success());
    let record = fs::read_to_string(dir.join("run_config.txt")).unwrap();
    assert!(record.contains("command: snlse meanfield"));
    assert!(record.contains("version:"));
    assert!(record.contains("coupling = 0.72"));
}
