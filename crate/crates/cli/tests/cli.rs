use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use emfield_core::grid::{GridSpec, LightconeGrid};
use emfield_core::pairing::{inner_product, PhysicalConstants};
use emfield_core::tensor::{AntisymTensor2, FourVector};
use emfield_core::testfn::AnalyticTestFunction;
use num_complex::Complex64;
use serde_json::Value;
use tempfile::TempDir;

fn emfield(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emfield"))
        .args(args)
        .env_remove("EMFIELD_CONFIG")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PACKETS: &str = r#"[
    {"family": "gaussian", "name": "f", "width": 1.0, "center": [0.0, 0.1, 0.3], "real": true,
     "amplitude": [[0.3,0.9],[-0.8,0.4],[0.5,-0.2],[0.1,0.7],[-0.4,-0.6],[0.8,0.1]]},
    {"family": "gaussian", "name": "g", "width": 0.9, "center": [0.2, -0.1, 0.0], "real": true,
     "amplitude": [[-0.6,0.2],[0.3,0.9],[0.7,-0.5],[-0.2,-0.8],[0.6,0.0],[-0.4,0.5]]},
    {"family": "gaussian", "name": "h", "width": 1.1, "center": [-0.2, 0.0, 0.2], "real": true,
     "amplitude": [[0.1,0.1],[0.2,-0.3],[-0.5,0.4],[0.9,0.2],[0.0,-0.7],[0.3,0.3]]}
]"#;

#[test]
fn verify_tensor_suite_passes() {
    let dir = TempDir::new().unwrap();
    let json = dir.path().join("r.json");
    let out = emfield(&["verify", "--suite", "tensor", "--json", s(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["command"], "verify");
    let checks = report["checks"].as_array().unwrap();
    assert!(!checks.is_empty());
    for c in checks {
        assert_eq!(c["suite"], "tensor");
        assert_eq!(c["status"], "pass");
        for key in ["name", "max_abs_error", "tolerance", "scale", "details"] {
            assert!(c.get(key).is_some(), "missing {key}");
        }
    }
    assert_eq!(report["environment"]["grid"]["radial_nodes"], 8);
    assert!(report["environment"]["versions"]["emfield_core"].is_string());
}

#[test]
fn verify_report_goes_to_stdout_without_json_flag() {
    let out = emfield(&["verify", "--suite", "appendix", "--deterministic"]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = report["checks"].as_array().unwrap().iter().map(|c| c["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"xi_commutator"));
    assert!(names.contains(&"box_not_complex_linear"));
    assert!(report.get("timings").is_none());
}

#[test]
fn failing_check_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", r#"{"tolerances": {"contrast": 1e6}}"#);
    let out = emfield(&["verify", "--config", s(&cfg), "--suite", "commutators"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let unknown = write(&dir, "u.json", r#"{"grid": {"radial_nodes": 8, "typo": 1}}"#);
    assert_eq!(emfield(&["verify", "--config", s(&unknown)]).status.code(), Some(2));
    let malformed = write(&dir, "m.json", "{");
    assert_eq!(emfield(&["verify", "--config", s(&malformed)]).status.code(), Some(2));
    assert_eq!(emfield(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
    assert_eq!(emfield(&["lorentz", "--suite", "tensor"]).status.code(), Some(2));
    assert_eq!(emfield(&["expect"]).status.code(), Some(2));
}

#[test]
fn config_from_environment_variable() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", r#"{"nope": true}"#);
    let out = Command::new(env!("CARGO_BIN_EXE_emfield"))
        .args(["verify", "--suite", "tensor"])
        .env("EMFIELD_CONFIG", &bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn io_errors_exit_three() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("absent.json");
    assert_eq!(emfield(&["verify", "--config", s(&missing)]).status.code(), Some(3));
    let unwritable = dir.path().join("no/such/dir/out.json");
    assert_eq!(emfield(&["verify", "--suite", "tensor", "--json", s(&unwritable)]).status.code(), Some(3));
}

#[test]
fn expect_matches_pairing() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        &format!(
            r#"{{"functions": {PACKETS},
                "words": [["annihilate f", "create g"], ["create f", "annihilate g"]],
                "fields": [[{{"kind": "chi", "label": "f"}}, {{"kind": "chi", "label": "g"}}]]}}"#
        ),
    );
    let out = emfield(&["expect", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let v = &report["results"]["words"][0]["value"];
    let got = Complex64::new(v[0].as_f64().unwrap(), v[1].as_f64().unwrap());

    let grid = Arc::new(LightconeGrid::build(&GridSpec::default()).unwrap());
    let c = |re, im| Complex64::new(re, im);
    let f = AnalyticTestFunction::gaussian_packet(
        AntisymTensor2::from_components([c(0.3, 0.9), c(-0.8, 0.4), c(0.5, -0.2), c(0.1, 0.7), c(-0.4, -0.6), c(0.8, 0.1)]),
        FourVector::on_shell([0.0, 0.1, 0.3]),
        1.0,
        true,
    )
    .unwrap();
    let g = AnalyticTestFunction::gaussian_packet(
        AntisymTensor2::from_components([c(-0.6, 0.2), c(0.3, 0.9), c(0.7, -0.5), c(-0.2, -0.8), c(0.6, 0.0), c(-0.4, 0.5)]),
        FourVector::on_shell([0.2, -0.1, 0.0]),
        0.9,
        true,
    )
    .unwrap();
    let expected = inner_product(&f.sample_on_grid(&grid), &g.sample_on_grid(&grid), &PhysicalConstants::default()).unwrap();
    assert_eq!(got, expected);
    assert_eq!(report["results"]["words"][1]["value"][0], 0.0);
    assert!(report["results"]["fields"][0]["value"][0].as_f64().unwrap() != 0.0);
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').filter_map(|x| x.parse::<f64>().ok()).collect())
        .collect();
    (header, rows)
}

#[test]
fn covariance_is_symmetric_and_psd() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &format!(r#"{{"functions": {PACKETS}}}"#));
    let csv = dir.path().join("cov.csv");
    let json = dir.path().join("cov.json");
    let out = emfield(&["covariance", "--config", s(&cfg), "--out", s(&csv), "--json", s(&json)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = parse_csv(&std::fs::read_to_string(&csv).unwrap());
    assert_eq!(header, ["label", "f", "g", "h"]);
    assert_eq!(rows.len(), 3);
    let m = nalgebra::DMatrix::from_fn(3, 3, |i, j| rows[i][j]);
    assert_eq!(m, m.transpose());
    let eig = nalgebra::SymmetricEigen::new(m.clone()).eigenvalues;
    assert!(eig.min() >= -1e-10 * eig.max());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn sample_reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "c.json", &format!(r#"{{"functions": {PACKETS}, "samples": 500}}"#));
    let run = |tag: &str, jobs: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let json = dir.path().join(format!("{tag}.json"));
        let out = emfield(&[
            "sample", "--config", s(&cfg), "--seed", "17", "--deterministic", "--jobs", jobs,
            "--out", s(&csv), "--json", s(&json),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read(&csv).unwrap(), std::fs::read(&json).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "1");
    let c = run("c", "4");
    assert_eq!(a, b);
    assert_eq!(a.0, c.0);
    let (header, rows) = parse_csv(std::str::from_utf8(&a.0).unwrap());
    assert_eq!(header, ["f", "g", "h"]);
    assert_eq!(rows.len(), 500);
    let report: Value = serde_json::from_slice(&a.1).unwrap();
    assert_eq!(report["results"]["moments"]["samples"], 500);
    let other = emfield(&["sample", "--config", s(&cfg), "--seed", "18"]);
    assert_ne!(other.stdout, a.0);
}

#[test]
fn convergence_levels() {
    let dir = TempDir::new().unwrap();
    let single = write(&dir, "s.json", r#"{"convergence": {"radial_levels": [8]}}"#);
    assert_eq!(emfield(&["convergence", "--config", s(&single)]).status.code(), Some(2));

    let zero = write(
        &dir,
        "z.json",
        r#"{"functions": [{"family": "gaussian", "name": "z", "width": 1.0, "center": [0, 0, 0.5],
                           "amplitude": [[0,0],[0,0],[0,0],[0,0],[0,0],[0,0]]}],
            "convergence": {"pair": ["z", "z"]}}"#,
    );
    let out = emfield(&["convergence", "--config", s(&zero)]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    for table in report["results"]["convergence"].as_array().unwrap() {
        for v in table["values"].as_array().unwrap() {
            assert_eq!(v[0], 0.0);
            assert_eq!(v[1], 0.0);
        }
    }

    let out = emfield(&["convergence", "--deterministic"]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["results"]["convergence"].as_array().unwrap().len(), 2);
}

#[test]
fn lorentz_coarse_grid_fails_boost_only() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "l.json",
        r#"{"lorentz": {"rapidities": [0.0, 0.3], "grid": {"radial_nodes": 16, "angular": "lebedev26"}}}"#,
    );
    // 26 directions cannot resolve the boosted packets; only the boost check may fail
    let out = emfield(&["lorentz", "--config", s(&cfg), "--deterministic"]);
    assert_eq!(out.status.code(), Some(1));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let boosts = report["results"]["boosts"].as_array().unwrap();
    assert_eq!(boosts[0]["relative_deviation"], 0.0);
    for c in report["checks"].as_array().unwrap() {
        let expected = if c["name"] == "boosts" { "fail" } else { "pass" };
        assert_eq!(c["status"], expected, "{}", c["name"]);
    }
}

#[test]
fn deterministic_verify_is_byte_identical() {
    let a = emfield(&["verify", "--suite", "pairing", "--suite", "maps", "--seed", "5", "--deterministic"]);
    let b = emfield(&["verify", "--suite", "pairing", "--suite", "maps", "--seed", "5", "--deterministic"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
