use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use annulus_kit::{RunConfig, WeightSpec};
use serde_json::Value;
use tempfile::TempDir;

fn kit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_annulus-kit"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(dir: &Path) -> Value {
    let text = fs::read_to_string(dir.join("out/report.json")).expect("report written");
    serde_json::from_str(&text).expect("valid json")
}

#[test]
fn weight_reports() {
    let tmp = TempDir::new().unwrap();
    let out = kit(tmp.path(), &["--weight", "exp_linear", "weight"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(tmp.path());
    assert_eq!(r["body"][0]["h4"]["m"].as_f64().unwrap(), 1.0);

    let out = kit(tmp.path(), &["--weight", "constant", "weight"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(tmp.path());
    let h4 = &r["body"][0]["h4"];
    assert_eq!(h4["m"].as_f64(), Some(0.0));
    assert_eq!(h4["log_c"].as_f64(), Some(0.0));
    for e in r["body"][0]["condition"]["entries"].as_array().unwrap() {
        assert_eq!(e["sup"].as_f64(), Some(0.0));
    }
}

#[test]
fn negative_table_sample_is_an_invalid_weight() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("w.csv"), "x,omega\n-1,1.0\n0,-0.5\n1,2.0\n").unwrap();
    let out = kit(tmp.path(), &["--weight", "table:w.csv", "weight"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid weight"));
}

#[test]
fn exp_linear_annulus_is_the_circle_of_radius_e() {
    let tmp = TempDir::new().unwrap();
    let out = kit(tmp.path(), &["--weight", "exp_linear", "spectrum", "annulus"]);
    assert_eq!(out.status.code(), Some(0));
    let a = &report(tmp.path())["body"][0]["annulus"];
    let e = std::f64::consts::E;
    assert!((a["r_in"].as_f64().unwrap() - e).abs() <= 1e-6);
    assert!((a["r_out"].as_f64().unwrap() - e).abs() <= 1e-6);
}

#[test]
fn stretched_exp_radius_carries_the_discrepancy_flag() {
    let tmp = TempDir::new().unwrap();
    let out = kit(tmp.path(), &["--weight", "stretched_exp:1,0.5", "spectrum", "radius"]);
    assert_eq!(out.status.code(), Some(0));
    let fwd = &report(tmp.path())["body"][0]["forward"];
    assert!(fwd["estimate"].as_f64().is_some());
    assert_eq!(fwd["discrepancy"]["flag"], "stretched-exp-annulus-discrepancy");
}

#[test]
fn constant_map_is_a_ring_at_one() {
    let tmp = TempDir::new().unwrap();
    let out = kit(tmp.path(), &["--weight", "constant", "--L", "128", "spectrum", "map"]);
    assert_eq!(out.status.code(), Some(0));
    let m = &report(tmp.path())["body"][0];
    assert_eq!(m["contradictions"].as_u64(), Some(0));
    assert_eq!(m["band_matches"], true);
    assert_eq!(m["inside_band"][0].as_f64(), Some(1.0));
    assert_eq!(m["inside_band"][1].as_f64(), Some(1.0));
    let tsv = fs::read_to_string(tmp.path().join("out/raster.tsv")).unwrap();
    let inside: Vec<&str> = tsv.lines().filter(|l| l.contains("certified_inside")).collect();
    assert!(!inside.is_empty());
    for l in inside {
        let f: Vec<f64> = l.split('\t').take(2).map(|v| v.parse().unwrap()).collect();
        assert!((f[0].hypot(f[1]) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pseudospectrum_is_labelled_diagnostic() {
    let tmp = TempDir::new().unwrap();
    let out = kit(tmp.path(), &["--weight", "constant", "spectrum", "pseudo", "--size", "64"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(tmp.path())["body"][0]["result"]["label"], "DIAGNOSTIC");
    let tsv = fs::read_to_string(tmp.path().join("out/pseudo.tsv")).unwrap();
    assert!(tsv.starts_with("# DIAGNOSTIC"));
}

#[test]
fn multiplier_commands() {
    let tmp = TempDir::new().unwrap();
    let base = ["--weight", "constant", "--L", "64"];

    let out = kit(tmp.path(), &[&base[..], &["--kernel", "triangle:1", "multiplier", "thm4"]].concat());
    assert_eq!(out.status.code(), Some(0));
    let r = &report(tmp.path())["body"][0]["report"];
    assert!(r["margin"].as_f64().unwrap().abs() <= 1e-3);
    assert_eq!(r["pass"], true);

    let out = kit(tmp.path(), &[&base[..], &["--kernel", "delta", "multiplier", "norm"]].concat());
    assert_eq!(out.status.code(), Some(0));
    assert!((report(tmp.path())["body"][0]["value"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    let out = kit(
        tmp.path(),
        &[&base[..], &["--kernel", "triangle:1", "multiplier", "commute", "--shift", "1"]].concat(),
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(report(tmp.path())["body"][0]["residual"].as_f64().unwrap() <= 1e-10);

    let out = kit(tmp.path(), &[&base[..], &["--kernel", "bump:0,1", "multiplier", "symbol"]].concat());
    assert_eq!(out.status.code(), Some(0));
    let strip: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/symbol_strip.json")).unwrap()).unwrap();
    assert!(!strip.as_array().unwrap().is_empty());
}

#[test]
fn verify_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let out = kit(tmp.path(), &["verify"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = report(tmp.path());
    assert!(r["body"]["checks"].as_array().unwrap().len() >= 40);

    let out = kit(tmp.path(), &["--h", "1", "verify"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(report(tmp.path())["body"]["failed"].as_u64().unwrap() > 0);

    fs::write(tmp.path().join("empty.json"), r#"{"weights": []}"#).unwrap();
    let out = kit(tmp.path(), &["--config", "empty.json", "verify"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no weights configured"));
}

#[test]
fn usage_and_config_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(kit(tmp.path(), &["spectrum", "nonsense"]).status.code(), Some(2));
    assert_eq!(kit(tmp.path(), &["--h", "0.3", "spectrum", "annulus"]).status.code(), Some(2));
    fs::write(tmp.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(kit(tmp.path(), &["--config", "bad.json", "weight"]).status.code(), Some(2));
}

#[test]
fn reports_are_deterministic_and_carry_the_config_hash() {
    let tmp = TempDir::new().unwrap();
    let config = RunConfig {
        weights: vec![WeightSpec::catalogue("exp_poly", &[0.0])],
        ..RunConfig::default()
    };
    fs::write(tmp.path().join("run.json"), config.to_json()).unwrap();
    let args = ["--config", "run.json", "--L", "64", "spectrum", "map", "--n-r", "9", "--n-theta", "4"];
    assert_eq!(kit(tmp.path(), &args).status.code(), Some(0));
    let first = fs::read(tmp.path().join("out/report.json")).unwrap();
    assert_eq!(kit(tmp.path(), &args).status.code(), Some(0));
    let second = fs::read(tmp.path().join("out/report.json")).unwrap();
    assert_eq!(first, second);

    let mut effective = config;
    effective.grid.half_width = 64.0;
    let r = report(tmp.path());
    assert_eq!(r["config_hash"], effective.hash());
    assert_eq!(r["tolerances"]["tail_tol"].as_f64(), Some(1e-10));
}
