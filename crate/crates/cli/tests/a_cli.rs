//! End-to-end tests of the `geophase` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geophase"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_in(dir: &Path, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run".to_string(), config.display().to_string()];
    args.extend(["--output-dir".to_string(), dir.display().to_string()]);
    args.extend(extra.iter().map(|s| s.to_string()));
    bin().args(&args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn manifest(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.manifest.json"))).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn list_is_alphabetized_and_names_figures() {
    let o = run(&["list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().map(|l| l.split_whitespace().next().unwrap()).collect();
    assert_eq!(names.len(), 7);
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert!(text.contains("noise-sweep → Fig. 5(b)"));
    for n in ["free-evolution", "geometric", "freq-switch", "dispersive", "wigner-snapshots", "sensitivity-curve"] {
        assert!(names.contains(&n), "{n}");
    }
}

#[test]
fn sensitivity_curve_writes_csv_manifest_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &configs().join("sensitivity_curve.json"), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("sensitivity_curve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("experiment,x_name,x_value,series,y_name,y_value,flag"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.iter().all(|r| r.len() == 7 && r[0] == "sensitivity-curve" && r[1] == "squeeze_db"));
    assert!(rows.iter().any(|r| r[4] == "r") && rows.iter().any(|r| r[4] == "delta_eta_r"));
    assert!(!csv.contains('\r'));

    let m = manifest(dir.path(), "sensitivity_curve");
    for key in ["tool", "version", "library_version", "experiment", "resolved_config", "timing_seconds", "summary"] {
        assert!(!m[key].is_null(), "manifest lacks {key}");
    }
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["outputs"]["rows"].as_u64().unwrap() as usize, rows.len());
    let x = m["summary"]["crossing_db"].as_f64().unwrap();
    assert!(x > 3.9 && x < 4.0, "{x}");
    let svg = fs::read_to_string(dir.path().join("sensitivity_curve.delta_eta_r.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn geometric_manifest_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &configs().join("geometric.json"), &["--no-svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = &manifest(dir.path(), "geometric")["summary"];
    let rel = |a: &str, b: &str| {
        let (a, b) = (s[a].as_f64().unwrap(), s[b].as_f64().unwrap());
        (a - b).abs() / b.abs()
    };
    assert!(rel("phase_numeric", "phase_closed_form") < 1e-4);
    assert!(rel("qfi_numeric", "qfi_closed_form") < 1e-4);
    assert!(fs::read_dir(dir.path()).unwrap().all(|e| !e.unwrap().path().extension().is_some_and(|x| x == "svg")));
}

#[test]
fn invalid_channel_exits_2_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        "bad.json",
        "{\n  \"experiment\": \"noise-sweep\",\n  \"noise\": {\"channels\": [\"photon_loss\"]}\n}\n",
    );
    let o = run_in(&out, &cfg, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn config_errors_exit_2_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.json", "{\n  \"experiment\": \"geometric\",\n  \"cutoff\": ,\n}\n", "line 3"),
        ("unknown_key.json", "{\n  \"experiment\": \"geometric\",\n  \"cutof\": 40\n}\n", "cutof"),
        ("bad_experiment.json", "{\"experiment\": \"teleport\"}", "teleport"),
        ("unused_section.json", "{\"experiment\": \"geometric\", \"noise\": {\"rates\": [0.1]}}", "noise"),
        ("negative_rate.json", "{\"experiment\": \"noise-sweep\", \"noise\": {\"rates\": [-0.1]}}", "rate"),
    ];
    for (name, text, needle) in cases {
        let cfg = write_config(dir.path(), name, text);
        let o = run_in(&dir.path().join("out"), &cfg, &[]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", stderr(&o));
        assert!(stderr(&o).contains(needle), "{name}: {}", stderr(&o));
    }
    assert!(!dir.path().join("out").exists());
    assert_eq!(run(&["run", "/nonexistent/config.json"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let cfg = configs().join("sensitivity_curve.json");
    assert_eq!(run_in(dir.path(), &cfg, &["--jobs", "0"]).status.code(), Some(2));
}

#[test]
fn unconverged_derivative_exits_3_with_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "coarse.json",
        r#"{"experiment": "free-evolution", "cutoff": 40, "fd_step": 0.05,
            "sweep": {"start": 3.0, "stop": 4.0, "points": 2}, "output": {"stem": "coarse"}}"#,
    );
    let out = dir.path().join("out");
    let o = run_in(&out, &cfg, &["--no-svg"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let m = manifest(&out, "coarse");
    assert_eq!(m["exit_code"], 3);
    assert_eq!(m["diagnostics"]["convergence_failure"], true);
    let csv = fs::read_to_string(out.join("coarse.csv")).unwrap();
    assert!(csv
        .lines()
        .any(|l| l.ends_with("convergence") || l.contains(",convergence;") || l.contains(";convergence")));
}

#[test]
fn manifest_reruns_to_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = run_in(&a, &configs().join("dispersive.json"), &["--no-svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let o = run_in(&b, &a.join("dispersive.manifest.json"), &["--no-svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let read = |d: &Path| fs::read(d.join("dispersive.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    // identical apart from the output directory given on the command line
    let strip = |d: &Path| {
        let mut c = manifest(d, "dispersive")["resolved_config"].clone();
        c["output"]["dir"] = Value::Null;
        c
    };
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "free.json",
        r#"{"experiment": "free-evolution", "cutoff": 40, "sweep": {"start": 0.5, "stop": 7.0, "points": 9}}"#,
    );
    let csvs: Vec<Vec<u8>> = ["1", "3"]
        .iter()
        .map(|j| {
            let out = dir.path().join(format!("jobs{j}"));
            let o = run_in(&out, &cfg, &["--jobs", j, "--no-svg"]);
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            fs::read(out.join("free-evolution.csv")).unwrap()
        })
        .collect();
    assert_eq!(csvs[0], csvs[1]);
}

#[test]
fn cutoff_override_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &configs().join("geometric.json"), &["--cutoff", "50", "--no-svg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(dir.path(), "geometric");
    assert_eq!(m["resolved_config"]["cutoff"], 50);
    assert_eq!(m["resolved_config"]["output"]["dir"], dir.path().display().to_string());
}
