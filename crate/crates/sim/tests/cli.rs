use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use admittance_core::harness::Experiment;
use admittance_sim::output::{STABILITY_HEADER, SUITE_HEADER, TRACE_HEADER};
use admittance_sim::scenario_file;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_admittance-sim"));
    c.env_remove("ADMITTANCE_OUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn repo_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn write_scenario(dir: &Path, name: &str, e: Experiment) -> PathBuf {
    let p = dir.join(name);
    let v = scenario_file::scenario_to_value(&e.scenario());
    std::fs::write(&p, serde_json::to_string(&v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn shipped_scenarios_match_presets() {
    for e in Experiment::ALL {
        let loaded = scenario_file::load_scenario(&repo_file(&format!("scenarios/exp{}.json", e.id()))).unwrap();
        assert_eq!(loaded, e.scenario(), "exp{}", e.id());
    }
    assert!(scenario_file::load_sweep(&repo_file("scenarios/stability_grid.json")).is_ok());
}

#[test]
fn run_compensated_preset_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "exp3.json", Experiment::Exp3);
    let out = dir.path().join("out");
    let o = run(&["run", "--scenario", s(&scenario), "--out", s(&out), "--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), TRACE_HEADER.join(","));
    assert!(trace.lines().count() > 1000);
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("true,completed,"));
    for svg in ["z_trajectory.svg", "mass_estimate.svg"] {
        let text = std::fs::read_to_string(out.join(svg)).unwrap();
        assert!(text.starts_with("<svg"), "{svg}");
        assert!(text.contains("<polyline") || text.contains("<path"), "{svg}");
    }
    assert!(String::from_utf8_lossy(&o.stdout).contains("completed"));
}

#[test]
fn run_uncompensated_preset_fails_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "exp1.json", Experiment::Exp1);
    let out = dir.path().join("out");
    let o = run(&["run", "--scenario", s(&scenario), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.lines().nth(1).unwrap().starts_with("false,failed_timeout,"));
    assert!(!out.join("z_trajectory.svg").exists());
}

#[test]
fn malformed_json_exits_one_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("bad.json");
    std::fs::write(&scenario, "{\"schema_version\": 1,").unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--scenario", s(&scenario), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("malformed JSON"));
}

#[test]
fn invalid_field_reports_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    for (body, path) in [
        (
            r#"{"schema_version": 1, "admittance": {"m_a": 4, "b_a": 10, "k_a": -3}}"#,
            "admittance.k_a",
        ),
        (r#"{"schema_version": 1, "inner": {"tau": 0.05}}"#, "inner"),
        (r#"{"schema_version": 1, "noise": {"seed": "x"}}"#, "noise.seed"),
    ] {
        let scenario = dir.path().join("bad.json");
        std::fs::write(&scenario, body).unwrap();
        let o = run(&["run", "--scenario", s(&scenario), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(1), "{body}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(path), "{body}: {err}");
        assert!(!out.exists());
    }
}

#[test]
fn missing_scenario_file_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "run",
        "--scenario",
        s(&dir.path().join("nope.json")),
        "--out",
        s(&dir.path().join("o")),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["run"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn seed_flag_changes_noise_only() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "exp3.json", Experiment::Exp3);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(
        run(&["run", "--scenario", s(&scenario), "--out", s(&a), "--seed", "7"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        run(&["run", "--scenario", s(&scenario), "--out", s(&b)]).status.code(),
        Some(0)
    );
    let ta = std::fs::read(a.join("trace.csv")).unwrap();
    let tb = std::fs::read(b.join("trace.csv")).unwrap();
    assert_ne!(ta, tb);
}

#[test]
fn env_var_supplies_out_dir_and_flag_wins() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "exp3.json", Experiment::Exp3);
    let env_out = dir.path().join("from_env");
    let flag_out = dir.path().join("from_flag");
    let o = bin()
        .args(["run", "--scenario", s(&scenario)])
        .env("ADMITTANCE_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(env_out.join("trace.csv").exists());
    let o = bin()
        .args(["run", "--scenario", s(&scenario), "--out", s(&flag_out)])
        .env("ADMITTANCE_OUT_DIR", dir.path().join("unused"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(flag_out.join("trace.csv").exists());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn suite_writes_four_rows_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("suite");
    let o = run(&["suite", "--out", s(&out), "--plot"]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    let mut rdr = csv::Reader::from_path(out.join("suite_report.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), SUITE_HEADER.to_vec());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    let completed: Vec<&str> = rows.iter().map(|r| &r[3]).collect();
    assert_eq!(completed, ["false", "false", "true", "false"]);
    assert_eq!(&rows[1][8], "discrepancy");
    assert!(out.join("exp3_z_trajectory.svg").exists());
    assert!(!stdout.contains("FAIL"));
}

#[test]
fn corrupted_preset_is_a_config_error_row() {
    let dir = tempfile::tempdir().unwrap();
    let presets = dir.path().join("presets.json");
    std::fs::write(
        &presets,
        r#"{"schema_version": 1, "overrides": {"2": {"admittance": {"k_a": 0.0}}}}"#,
    )
    .unwrap();
    let out = dir.path().join("suite");
    let o = run(&["suite", "--out", s(&out), "--presets", s(&presets)]);
    assert_eq!(o.status.code(), Some(1));
    let mut rdr = csv::Reader::from_path(out.join("suite_report.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(&rows[1][8], "config-error");
    assert!(rows[1][9].contains("admittance.k_a"));
    assert_eq!(&rows[0][8], "ok");
}

#[test]
fn stability_map() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("stab");
    let grid = repo_file("scenarios/stability_grid.json");
    let o = run(&["stability", "--scenario", s(&grid), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let mut rdr = csv::Reader::from_path(out.join("stability_map.csv")).unwrap();
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        STABILITY_HEADER.to_vec()
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let mut degenerate = 0;
    for r in &rows {
        let exact = &r[2] == "0" && &r[3] == "1";
        assert_eq!(&r[7] == "true", exact, "{r:?}");
        if exact {
            degenerate += 1;
        } else {
            assert_eq!(&r[8], "true", "{r:?}");
        }
        if r[4].parse::<f64>().unwrap() < 0.0 && !exact {
            assert_eq!(&r[6], "false", "negative damping must be unstable: {r:?}");
        }
    }
    assert!(degenerate > 0);
}

#[test]
fn waypoints_dump_is_the_canonical_path() {
    let o = run(&["waypoints-dump"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let wps = v.as_array().unwrap();
    assert_eq!(wps.len(), 6);
    assert_eq!(wps[2]["event"]["kind"], "grasp");
    assert_eq!(wps[5]["event"]["kind"], "release");
}
