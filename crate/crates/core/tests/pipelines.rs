use std::fs;
use std::path::Path;
use std::process::Command;

use betaedge::lab::pipelines::{field_lower_index, field_path};
use betaedge::lab::{run_experiment, ExperimentConfig, Report, Status};
use betaedge::stats::{ks_two_sample, mean};

const TW: &str = r#"
kind = "tw_reference"
seed = 11

[sao]
beta = 2.0
h = 0.05

[samples]
sao = 400
"#;

fn report(text: &str) -> Report {
    run_experiment(&ExperimentConfig::parse(text).unwrap().validate().unwrap()).unwrap()
}

fn stat(r: &Report, key: &str) -> f64 {
    r.statistics[key].as_f64().unwrap()
}

fn edge_lab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_edge-lab")).args(args).output().unwrap()
}

fn column(r: &Report, source: &str) -> Vec<f64> {
    r.data
        .rows
        .iter()
        .filter(|row| row[0] == source)
        .map(|row| row[2].parse().unwrap())
        .collect()
}

#[test]
fn cli_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tw.toml");
    fs::write(&config, TW).unwrap();
    let outs: Vec<_> = ["a", "b"].iter().map(|d| dir.path().join(d)).collect();
    for out in &outs {
        let o = edge_lab(&["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &Path, f: &str| fs::read(d.join(f)).unwrap();
    assert_eq!(read(&outs[0], "data.csv"), read(&outs[1], "data.csv"));
    assert_eq!(read(&outs[0], "manifest.json"), read(&outs[1], "manifest.json"));

    let o = edge_lab(&["report", outs[0].to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&o.stdout).contains("tw_reference"));
}

#[test]
fn cli_rejects_empty_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("empty.toml");
    fs::write(&config, "").unwrap();
    let o = edge_lab(&["validate", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("kind") && err.contains("seed"), "{err}");
}

#[test]
fn tw_reference_moments() {
    let r = report(TW);
    assert_eq!(r.statistics["sample_count"], 400);
    // Tracy-Widom (β = 2): mean -1.7711, variance 0.8132
    assert!((stat(&r, "sample_mean") + 1.7711).abs() < 0.15);
    assert!((stat(&r, "sample_variance") - 0.8132).abs() < 0.2);
    assert_eq!(r.status, Status::Pass);
}

#[test]
fn shifted_potential_moves_edge_only() {
    let edge = |potential: &str| {
        report(&format!(
            r#"
kind = "edge_universality"
seed = 3
[model]
potential = "{potential}"
beta = 2.0
n = 200
[samples]
matrices = 400
sao = 100
[edge]
reference = "hermite_de"
"#
        ))
    };
    let (base, shifted) = (edge("0 0 0.25"), edge("0.25 -0.5 0.25"));
    assert!((stat(&shifted, "edge") - stat(&base, "edge") - 1.0).abs() < 1e-10);
    let (x, y) = (column(&base, "matrix"), column(&shifted, "matrix"));
    assert!(ks_two_sample(&x, &y).statistic <= 0.05);
}

#[test]
fn second_eigenvalue_matches_operator() {
    let r = report(
        r#"
kind = "edge_universality"
seed = 5
[model]
potential = "0 0 0.25"
beta = 2.0
n = 1000
[samples]
matrices = 1000
sao = 1000
[sao]
h = 0.05
[edge]
eigenvalue = 1
"#,
    );
    let (x, y) = (column(&r, "matrix"), column(&r, "reference"));
    let se = (stat(&r, "matrix_variance") / x.len() as f64 + stat(&r, "reference_variance") / y.len() as f64).sqrt();
    assert!((mean(&x) - mean(&y)).abs() <= 3.0 * se, "{} vs {}", mean(&x), mean(&y));
}

#[test]
fn semicircle_support() {
    let r = report(
        r#"
kind = "equilibrium_tables"
seed = 0
[model]
potential = "0 0 0.25"
"#,
    );
    assert!((stat(&r, "support_left") + 2.0).abs() < 1e-10);
    assert!((stat(&r, "support_right") - 2.0).abs() < 1e-10);
    assert!(r.check_by_name("mass_outside_support").unwrap().value.unwrap() <= 0.01);

    let bad = ExperimentConfig::parse(
        "kind = \"equilibrium_tables\"\nseed = 0\n[model]\npotential = \"0 0 0.25\"\n[equilibrium]\nx = [0.5, 1.0]\n",
    )
    .unwrap()
    .validate();
    assert!(bad.unwrap_err().to_string().contains("equilibrium.x"));
}

#[test]
fn frozen_field_is_deterministic_parabola() {
    let r = report(
        r#"
kind = "field_clt"
seed = 0
[model]
potential = "0 0 0.25"
beta = inf
n = 100000
[field]
cutoff_c = 0.0
"#,
    );
    assert!(r.check_by_name("deterministic_variance").unwrap().value.unwrap() <= 1e-12);
    assert!((stat(&r, "mean_coefficient") - 0.5).abs() <= 0.01);
}

#[test]
fn field_path_starts_at_zero() {
    let n = 1000;
    let (a, b) = (vec![0.3; n], vec![1.2; n - 1]);
    let lower = field_lower_index(n, 0.0);
    let p = field_path(&a, &b, (0.0, 1.0), (10.0, 1.0), lower, &[0.0, 0.5]).unwrap();
    assert_eq!(p.values[0], 0.0);
    assert!(p.values[1] != 0.0);
}
