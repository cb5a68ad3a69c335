use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fourphoton::cli::io::{read_csv, write_csv};
use fourphoton::fit::{dip_value, fringe_value, DipParams, FringeParams};
use fourphoton::scan::{ScanRow, ScanTable};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fourphoton"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &TempDir, config: &str) -> ScanTable {
    let cfg = write(dir, "run.json", config);
    let out = dir.path().join("scan.csv");
    let o = run(&["simulate", "--config", path_str(&cfg), "--out", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    read_csv(&std::fs::read_to_string(out).unwrap()).unwrap()
}

fn table_with_counts(scenario: &str, xs: &[f64], f: impl Fn(f64) -> f64) -> String {
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rows = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| ScanRow { x, probability: y / max, counts: Some(y.round() as u64) })
        .collect();
    write_csv(&ScanTable::new(scenario, rows).unwrap())
}

fn fit_json(dir: &TempDir, csv: &str, extra: &[&str]) -> (Output, Value) {
    let data = write(dir, "data.csv", csv);
    let mut args = vec!["fit", path_str(&data)];
    args.extend_from_slice(extra);
    let o = bin().args(&args).output().unwrap();
    let v = serde_json::from_slice(&o.stdout).unwrap_or(Value::Null);
    (o, v)
}

#[test]
fn unknown_config_key_exits_1_and_names_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", r#"{"source": {"kind": "ideal"}, "sweeps": {}}"#);
    let o = run(&["simulate", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sweeps"), "{}", stderr(&o));
}

#[test]
fn empty_lambdas_exit_1() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bad.json",
        r#"{"source": {"kind": "schmidt", "lambdas": []},
            "circuit": {"theta1": "0 deg", "phi": "0 deg"},
            "sweep": {"variable": "theta2", "from": "0 deg", "to": "90 deg", "steps": 5},
            "delay": {"delta_um": 0}}"#,
    );
    let o = run(&["simulate", "--config", path_str(&cfg)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn theta_scan_minima_and_header() {
    let dir = TempDir::new().unwrap();
    let t = simulate(
        &dir,
        r#"{"source": {"kind": "ideal"},
            "circuit": {"theta1": "0 deg", "phi": "0 deg"},
            "sweep": {"variable": "theta2", "from": "0 deg", "to": "90 deg", "steps": 9001},
            "delay": {"delta_um": 0}}"#,
    );
    assert_eq!(t.scenario, "theta_scan");
    let raw = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(raw.starts_with("# fourphoton v1 theta_scan\nx,probability\n"));
    let rows = &t.rows;
    let minima: Vec<f64> = (1..rows.len() - 1)
        .filter(|&i| rows[i].probability < rows[i - 1].probability && rows[i].probability <= rows[i + 1].probability)
        .filter(|&i| rows[i].probability < 1e-4)
        .map(|i| rows[i].x.to_degrees())
        .collect();
    assert_eq!(minima.len(), 4, "{minima:?}");
    for (got, want) in minima.iter().zip([13.68, 31.32, 58.68, 76.32]) {
        assert!((got - want).abs() <= 0.01, "{got} vs {want}");
    }
}

#[test]
fn fringe_max_over_min_ratio() {
    let dir = TempDir::new().unwrap();
    // balanced setting for a mismatched source: V4 = 1/2, V2 = 0
    let t = simulate(
        &dir,
        r#"{"source": {"kind": "effective_e_over_a", "value": 0.5},
            "circuit": {"theta1": "0.23882915453112732 rad", "theta2": "22.5 deg"},
            "sweep": {"variable": "phi", "from": "0 deg", "to": "360 deg", "steps": 721},
            "delay": {"delta_um": 0}}"#,
    );
    let p = t.probabilities();
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((max / min - 3.0).abs() < 1e-9, "{}", max / min);
}

#[test]
fn simulate_output_round_trips() {
    let dir = TempDir::new().unwrap();
    let t = simulate(
        &dir,
        r#"{"source": {"kind": "schmidt", "lambdas": [0.8, 0.6]},
            "circuit": {"theta1": "0 deg", "theta2": "13.68 deg", "phi": "0 deg"},
            "sweep": {"variable": "delay", "from": "-300 um", "to": 300, "steps": 31},
            "delay": {"coherence_length_um": 100}}"#,
    );
    assert_eq!(t.scenario, "hom_dip");
    assert_eq!(write_csv(&t), std::fs::read_to_string(dir.path().join("scan.csv")).unwrap());
    assert_eq!(t.rows.first().unwrap().x, -300.0);
}

#[test]
fn sample_is_reproducible_and_zero_counts_are_zero() {
    let dir = TempDir::new().unwrap();
    simulate(
        &dir,
        r#"{"source": {"kind": "ideal"},
            "circuit": {"theta1": "0 deg", "phi": "0 deg"},
            "sweep": {"variable": "theta2", "from": "0 deg", "to": "45 deg", "steps": 46},
            "delay": {"delta_um": 0}}"#,
    );
    let table = dir.path().join("scan.csv");
    let mut outs = Vec::new();
    for name in ["s1.csv", "s2.csv"] {
        let out = dir.path().join(name);
        let o = run(&["sample", path_str(&table), "--counts", "500", "--seed", "3", "--out", path_str(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(std::fs::read(out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);

    let o = run(&["sample", path_str(&table), "--counts", "500", "--seed", "4"]);
    assert_ne!(o.stdout, outs[0]);

    let o = run(&["sample", path_str(&table), "--counts", "0", "--seed", "3"]);
    assert!(o.status.success());
    let t = read_csv(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert!(t.rows.iter().all(|r| r.counts == Some(0)));
}

#[test]
fn fit_fringe_recovers_visibilities() {
    let dir = TempDir::new().unwrap();
    let truth = FringeParams { scale: 1e6, v4: 0.62, v2: 0.39, phase: 0.0 };
    let xs: Vec<f64> = (0..72).map(|i| i as f64 * std::f64::consts::PI / 36.0).collect();
    let (o, v) = fit_json(&dir, &table_with_counts("fringe", &xs, |x| fringe_value(&truth, x)), &["--model", "fringe"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for key in ["params", "stderr", "rss", "r2", "iterations", "converged"] {
        assert!(v.get(key).is_some(), "missing {key} in {v}");
    }
    assert!((v["params"]["v4"].as_f64().unwrap() - 0.62).abs() < 1e-4);
    assert!((v["params"]["v2"].as_f64().unwrap() - 0.39).abs() < 1e-4);
    assert_eq!(v["converged"], Value::Bool(true));
}

#[test]
fn fit_dip_recovers_visibility_and_width() {
    let dir = TempDir::new().unwrap();
    let truth = DipParams::from_fwhm(1e6, 0.88, 0.0, 196.0);
    let xs: Vec<f64> = (0..61).map(|i| -600.0 + 20.0 * i as f64).collect();
    let csv = table_with_counts("hom_dip", &xs, |x| dip_value(&truth, x));
    let (o, v) = fit_json(&dir, &csv, &["--model", "dip", "--weighted"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let vis = v["params"]["visibility"].as_f64().unwrap();
    let width = v["params"]["width"].as_f64().unwrap();
    let fwhm = 2.0 * (2.0 * 2f64.ln()).sqrt() * width;
    assert!((vis - 0.88).abs() < 1e-4, "{vis}");
    assert!((fwhm - 196.0).abs() < 0.05, "{fwhm}");
}

#[test]
fn fit_with_too_few_rows_exits_1() {
    let dir = TempDir::new().unwrap();
    let csv = "# fourphoton v1 fringe\nx,probability,counts\n0.0e0,1.0e0,10\n1.0e0,5.0e-1,5\n";
    let (o, _) = fit_json(&dir, csv, &["--model", "fringe"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn fit_without_counts_exits_1() {
    let dir = TempDir::new().unwrap();
    let csv = "# fourphoton v1 fringe\nx,probability\n0.0e0,1.0e0\n1.0e0,5.0e-1\n2.0e0,2.0e-1\n3.0e0,1.0e-1\n4.0e0,0.0e0\n";
    let (o, _) = fit_json(&dir, csv, &["--model", "fringe"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn malformed_csv_exits_1() {
    let dir = TempDir::new().unwrap();
    let (o, _) = fit_json(&dir, "x,probability\n1,2\n", &["--model", "dip"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn balance_ideal_source() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "b.json", r#"{"source": {"kind": "ideal"}, "balance": {"tolerance": 1e-6}}"#);
    let o = run(&["balance", "--config", path_str(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["theta1_deg"].as_f64().unwrap() - 13.68).abs() <= 0.05, "{v}");
    assert_eq!(v["balanced"], Value::Bool(true));
}

#[test]
fn report_passes_and_writes_file() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.txt");
    let o = run(&["report", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.lines().filter(|l| l.starts_with("PASS") || l.contains("PASS")).count() >= 10);
    assert!(!text.contains("FAIL "));
}

#[test]
fn bad_arguments_exit_1() {
    assert_eq!(run(&["fit"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--config", "/nonexistent/run.json"]).status.code(), Some(1));
}
