//! End-to-end checks of the binary: exit codes, determinism of emitted files,
//! and the documented formats.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_isoblock"))
}

fn tmpdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("isoblock-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn fit_pools_a_decreasing_pair() {
    let dir = tmpdir("fit-pair");
    let input = dir.join("pair.csv");
    std::fs::write(&input, "dims=2\n2\n1\n").unwrap();
    let st = bin()
        .args(["fit", "--input"])
        .arg(&input)
        .args(["--out-dir"])
        .arg(&dir)
        .args(["--estimators", "lse,maxmin,minmax,mid"])
        .status()
        .unwrap();
    assert!(st.success());
    for kind in ["lse", "maxmin", "minmax", "mid"] {
        let text = read(&dir.join(format!("estimate_{kind}.csv")));
        assert_eq!(text, "dims=2\n1.5\n1.5\n", "kind {kind}");
    }
    let diag: serde_json::Value = serde_json::from_str(&read(&dir.join("diagnostics.json"))).unwrap();
    assert_eq!(diag["warning_nonconverged"], false);
}

#[test]
fn fit_monotone_input_is_identity_and_rerun_is_byte_identical() {
    let dir = tmpdir("fit-mono");
    let input = dir.join("mono.csv");
    let mut text = String::from("dims=3x2\n");
    for v in [0.0, 1.0, 2.0, 1.5, 2.5, 3.5] {
        text.push_str(&format!("{v}\n"));
    }
    std::fs::write(&input, &text).unwrap();
    let run = || {
        let st = bin()
            .args(["fit", "--input"])
            .arg(&input)
            .args(["--out-dir"])
            .arg(&dir)
            .args(["--estimators", "lse"])
            .status()
            .unwrap();
        assert!(st.success());
        read(&dir.join("estimate_lse.csv"))
    };
    let first = run();
    assert_eq!(first, text);
    let second = run();
    assert_eq!(first, second);
}

#[test]
fn fit_on_point_cloud_evaluates_at_design_points() {
    let dir = tmpdir("fit-cloud");
    let input = dir.join("cloud.csv");
    std::fs::write(&input, "0,1\n1,2\n").unwrap();
    let st = bin()
        .args(["fit", "--input"])
        .arg(&input)
        .args(["--out-dir"])
        .arg(&dir)
        .args(["--estimators", "maxmin,lse"])
        .status()
        .unwrap();
    assert!(st.success());
    let text = read(&dir.join("estimate_maxmin.csv"));
    assert_eq!(text, "0,1\n1,2\n");
    let text = read(&dir.join("estimate_lse.csv"));
    assert_eq!(text, "0,1\n1,2\n");
}

#[test]
fn fit_cloud_lse_ties_coincident_points() {
    // Two observations at the same location must share one fitted value:
    // the violating pair (0.5, y=3) vs (0.5, y=1) pools to 2, and the point
    // at 0 stays below it.
    let dir = tmpdir("fit-dup");
    let input = dir.join("cloud.csv");
    std::fs::write(&input, "0.5,3\n0.5,1\n0,0\n").unwrap();
    let st = bin()
        .args(["fit", "--input"])
        .arg(&input)
        .args(["--out-dir"])
        .arg(&dir)
        .args(["--estimators", "lse"])
        .status()
        .unwrap();
    assert!(st.success());
    let text = read(&dir.join("estimate_lse.csv"));
    assert_eq!(text, "0.5,2\n0.5,2\n0,0\n");
}

#[test]
fn parse_failure_exits_one() {
    let dir = tmpdir("fit-bad");
    let input = dir.join("bad.csv");
    std::fs::write(&input, "dims=2\n1\nnot-a-number\n").unwrap();
    let out = bin()
        .args(["fit", "--input"])
        .arg(&input)
        .args(["--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let unknown = bin().args(["no-such-command"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn reproduce_guard_exits_two() {
    let dir = tmpdir("repro-guard");
    let out = bin()
        .args(["reproduce", "--reps", "10", "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn graph_demo_respects_vertex_cap() {
    let dir = tmpdir("graph-cap");
    let input = dir.join("g.txt");
    std::fs::write(&input, "4\n1 2\n2 3\nobs 1 1.0\nobs 4 2.0\n").unwrap();
    let out = bin()
        .args(["graph-demo", "--input"])
        .arg(&input)
        .args(["--out-dir"])
        .arg(&dir)
        .env("ISOBLOCK_MAX_V", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let ok = bin()
        .args(["graph-demo", "--input"])
        .arg(&input)
        .args(["--out-dir"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(ok.success());
}

#[test]
fn counterexample_found_on_4x2_and_exhausted_in_1d() {
    let dir = tmpdir("cx");
    let out = bin()
        .args(["counterexample-search", "--out-dir"])
        .arg(&dir)
        .args(["--seed", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let witness: serde_json::Value = serde_json::from_str(&read(&dir.join("witness.json"))).unwrap();
    let gap = witness["gap"].as_f64().unwrap();
    assert!(gap > 1e-9);
    assert!(witness["max_min"].as_f64().unwrap() < witness["min_max"].as_f64().unwrap());
    // The witness field file parses back with the right shape.
    let field = read(&dir.join("witness_field.csv"));
    assert!(field.starts_with("dims=4x2\n"));

    let out = bin()
        .args(["counterexample-search", "--dims", "6", "--budget", "200", "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn counterexample_on_2x2_reports_an_outcome_either_way() {
    let dir = tmpdir("cx22");
    let out = bin()
        .args(["counterexample-search", "--dims", "2x2", "--budget", "5000", "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    match out.status.code() {
        Some(0) => {
            let witness: serde_json::Value =
                serde_json::from_str(&read(&dir.join("witness.json"))).unwrap();
            assert!(witness["gap"].as_f64().unwrap() > 1e-9);
        }
        Some(3) => {}
        other => panic!("unexpected exit {other:?}"),
    }
}

#[test]
fn rates_table_is_stable_and_well_formed() {
    let dir = tmpdir("rates");
    let out_path = dir.join("rates.csv");
    let run = || {
        let st = bin()
            .args(["rates", "--dims", "50x20", "--delta-grid", "12", "--out"])
            .arg(&out_path)
            .status()
            .unwrap();
        assert!(st.success());
        read(&out_path)
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let lines: Vec<&str> = first.trim_end().lines().collect();
    assert_eq!(lines[0], "q,dims,delta_star,lower,upper,regime,lambda");
    assert_eq!(lines.len(), 13);
    for row in &lines[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols.len(), 7);
        let lower: f64 = cols[3].parse().unwrap();
        let upper: f64 = cols[4].parse().unwrap();
        assert!(upper >= lower * (1.0 - 1e-9));
    }
}

#[test]
fn simulate_writes_csv_and_json() {
    let dir = tmpdir("simul");
    let st = bin()
        .args(["simulate", "--experiment", "VIIb", "--reps", "12", "--seed", "4", "--out-dir"])
        .arg(&dir)
        .status()
        .unwrap();
    assert!(st.success());
    let csv = read(&dir.join("simulate_VIIb.csv"));
    assert!(csv.starts_with("experiment,est,"));
    assert!(csv.contains("VIIb,lse/maxmin,"));
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.join("simulate_VIIb.json"))).unwrap();
    assert_eq!(report["reps"], 12);
    assert_eq!(report["kinds"].as_array().unwrap().len(), 2);
    assert!(report["diff"]["p_se"].as_f64().unwrap() <= 1.0);
}
