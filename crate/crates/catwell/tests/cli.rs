//! End-to-end runs of the `catwell` binary: exit codes, determinism, config
//! precedence, and the ramp → evolve file round trip.

use std::path::Path;
use std::process::{Command, Output};

use catwell::emit::read_csv;

fn catwell(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catwell"))
        .args(args)
        .current_dir(dir)
        .env("CATWELL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();

    let ok = catwell(&["report-paper"], dir.path());
    assert_eq!(code(&ok), 0, "stderr: {}", String::from_utf8_lossy(&ok.stderr));

    let usage = catwell(&["no-such-command"], dir.path());
    assert_eq!(code(&usage), 2);
    let usage = catwell(&["ramp", "--safety", "0"], dir.path());
    assert_eq!(code(&usage), 2);
    let usage = catwell(&["--config", "/no/such/file.cfg", "report-paper"], dir.path());
    assert_eq!(code(&usage), 2);

    // An impossible coherence budget is a computational failure, not usage.
    let fail = catwell(
        &["ramp", "--target-dn", "2e-3", "--safety", "0.5", "--t-coh", "1e-12"],
        dir.path(),
    );
    assert_eq!(code(&fail), 1, "stderr: {}", String::from_utf8_lossy(&fail.stderr));
    assert!(!fail.stderr.is_empty(), "failure must explain itself on stderr");
}

#[test]
fn report_paper_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let a = catwell(&["report-paper"], dir.path());
    let b = catwell(&["report-paper"], dir.path());
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout, "same invocation must give identical bytes");

    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    let r = &v["result"];
    assert!((r["n_c"].as_f64().unwrap() - 167_965.0).abs() < 0.01 * 167_965.0);
    assert!((r["omega0_bound"].as_f64().unwrap() - 99.4).abs() < 0.02 * 99.4);
    assert!((r["gamma_bound_hz"].as_f64().unwrap() - 0.141).abs() < 0.03 * 0.141);
    assert!((r["t_coh_s"].as_f64().unwrap() - 1.13).abs() < 0.02 * 1.13);
    assert!((r["power_nW"].as_f64().unwrap() - 7.9).abs() < 0.02 * 7.9);
    assert_eq!(r["x"].as_f64().unwrap(), 0.672);
    assert_eq!(r["y"].as_f64().unwrap(), 1.36);
}

#[test]
fn spectrum_sweep_emits_one_row_per_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let out = catwell(
        &[
            "spectrum",
            "--lambda-min",
            "0",
            "--lambda-max",
            "1",
            "--grid-points",
            "3",
            "--k",
            "6",
            "--out",
            "spec.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let table = read_csv(&std::fs::read_to_string(dir.path().join("spec.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 3);
    assert_eq!(
        table.columns,
        vec!["lambda", "e0", "e1", "e2", "e3", "e4", "e5", "dcoupling2", "dcoupling4"]
    );
    // First row is the λ = 0 harmonic ladder.
    let first = &table.rows[0];
    assert_eq!(first[0], 0.0);
    for i in 0..6 {
        assert!(
            (first[1 + i] - (i as f64 + 0.5)).abs() < 1e-5,
            "harmonic level {i} off: {}",
            first[1 + i]
        );
    }
    // Energies ascend within every row.
    for row in &table.rows {
        for i in 0..5 {
            assert!(row[1 + i] <= row[2 + i] + 1e-12);
        }
    }
}

#[test]
fn config_file_feeds_the_point_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("point.cfg");
    std::fs::write(&cfg, "kappa_hz = 1.0e6\ndelta_hz = 3.0e5\n").unwrap();

    let from_cfg = catwell(
        &["--config", "point.cfg", "potential", "--lambda", "0.5", "--points", "11", "--out", "a.csv"],
        dir.path(),
    );
    assert_eq!(code(&from_cfg), 0, "stderr: {}", String::from_utf8_lossy(&from_cfg.stderr));
    let table = read_csv(&std::fs::read_to_string(dir.path().join("a.csv")).unwrap()).unwrap();
    assert_eq!(table.meta_value("delta"), Some("3.000000000000e-01"));

    let overridden = catwell(
        &[
            "--config", "point.cfg", "potential", "--lambda", "0.5", "--points", "11",
            "--delta", "0.05", "--out", "b.csv",
        ],
        dir.path(),
    );
    assert_eq!(code(&overridden), 0);
    let table = read_csv(&std::fs::read_to_string(dir.path().join("b.csv")).unwrap()).unwrap();
    assert_eq!(table.meta_value("delta"), Some("5.000000000000e-02"));
}

#[test]
fn ramp_schedule_feeds_evolve_and_the_methods_agree() {
    let dir = tempfile::tempdir().unwrap();

    let ramp = catwell(
        &["ramp", "--target-dn", "2e-3", "--safety", "0.5", "--out", "sched.csv"],
        dir.path(),
    );
    assert_eq!(code(&ramp), 0, "stderr: {}", String::from_utf8_lossy(&ramp.stderr));
    let sched = read_csv(&std::fs::read_to_string(dir.path().join("sched.csv")).unwrap()).unwrap();
    assert_eq!(sched.columns, vec!["t_s", "lambda", "rate_bound"]);
    assert_eq!(sched.meta_value("safety"), Some("5.000000000000e-01"));
    let last = sched.rows.last().unwrap();
    assert!((last[1] - 1.002).abs() < 1e-12, "schedule must end at λ target");

    let evolve = catwell(
        &["evolve", "--schedule", "sched.csv", "--method", "both", "--out", "traj.csv"],
        dir.path(),
    );
    assert_eq!(code(&evolve), 0, "stderr: {}", String::from_utf8_lossy(&evolve.stderr));
    let traj = read_csv(&std::fs::read_to_string(dir.path().join("traj.csv")).unwrap()).unwrap();
    assert_eq!(traj.rows.len(), sched.rows.len(), "one metrics row per schedule node");
    let col = |name: &str| traj.column(name).unwrap_or_else(|| panic!("column {name}"));
    for row in &traj.rows {
        let (fg, fm) = (row[col("fidelity_grid")], row[col("fidelity_modal")]);
        assert!((fg - fm).abs() <= 0.01, "methods disagree: grid {fg} vs modal {fm}");
        assert!((row[col("norm_grid")] - 1.0).abs() < 1e-6);
        assert!((row[col("norm_modal")] - 1.0).abs() < 1e-6);
        assert!(row[col("parity_grid")] > 0.99, "even-sector ramp lost parity");
    }
    let first = &traj.rows[0];
    let final_row = traj.rows.last().unwrap();
    assert!((first[col("lambda")] - 0.98).abs() < 1e-12);
    assert!((final_row[col("lambda")] - 1.002).abs() < 1e-12);
    assert!(
        first[col("fidelity_grid")] > 1.0 - 1e-9,
        "the ramp starts in the instantaneous ground state"
    );
}
