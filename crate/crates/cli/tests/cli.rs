use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use viscowave_cli::parse_config;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_viscowave"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

#[test]
fn solve_writes_trajectory_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&fixture("solve.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("time,alpha_0,"));
    assert_eq!(csv.lines().count(), 1 + 257);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let l2 = report["errors_at_T"]["l2"].as_f64().unwrap();
    assert!(l2 > 0.0 && l2 < 1e-2, "L2 error {l2}");
}

#[test]
fn inadmissible_power_law_exits_one_with_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&fixture("validate_inadmissible.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("kappa = 1.1284 >= 1"), "{}", text(&out.stderr));
}

#[test]
fn admissible_kernel_passes_and_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&fixture("validate_ok.json"), dir.path(), &["--seed", "99", "--quiet"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(out.stdout.is_empty());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["positive_type"]["seed"], 99);
    assert_eq!(report["positive_type"]["normalized_forms"].as_array().unwrap().len(), 20);
    assert_eq!(report["admissible"], true);
}

#[test]
fn unknown_kernel_variant_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&fixture("unknown_variant.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    let err = text(&out.stderr);
    assert!(err.contains("kernel.variant: unknown value `gaussian`"), "{err}");
}

#[test]
fn missing_config_file_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&dir.path().join("absent.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn starved_picard_exits_two_but_keeps_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&fixture("picard_starved.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("did not converge"));
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert!(cert.is_object());
}

#[test]
fn picard_certificate_converges() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&fixture("picard.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("converged after"));
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn p1_convergence_preset_reports_rates() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&fixture("convergence_p1.json"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|&h| h == "rate_L2").expect("rate column");
    let last: Vec<&str> = lines.last().unwrap().split(',').collect();
    let rate: f64 = last[col].parse().unwrap();
    assert!((rate - 2.0).abs() < 0.1, "final L2 rate {rate}");
}

#[test]
fn fixtures_round_trip_through_json() {
    for name in
        ["solve.json", "validate_ok.json", "validate_inadmissible.json", "picard.json", "picard_starved.json", "convergence_p1.json"]
    {
        let first = parse_config(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap();
        let second = parse_config(&first.to_json()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(first, second, "{name}");
    }
}

#[test]
fn every_enum_spelling_round_trips() {
    let configs = [
        r#"{"command": "convergence",
            "kernel": {"variant": "power_law", "exponent": 0.3, "kappa": 0.5},
            "space": {"kind": "fem", "degree": 2, "sizes": [4, 8, 16]},
            "problem": {"family": "sine_2d", "final_time": 0.5},
            "solver": {"scheme": "trapezoidal",
                       "time_policy": {"policy": "fixed", "steps": 1024},
                       "initial": {"displacement": "interpolation", "velocity": "ritz"}}}"#,
        r#"{"command": "solve",
            "space": {"kind": "spectral", "size": 6},
            "solver": {"time_policy": {"policy": "power_of_h", "exponent": 1.5, "factor": 2.0},
                       "initial": {"displacement": "fourier", "velocity": "fourier"}},
            "output": "runs/a"}"#,
    ];
    for text in configs {
        let first = parse_config(text).unwrap();
        let second = parse_config(&first.to_json()).unwrap_or_else(|e| panic!("{e}\n{}", first.to_json()));
        assert_eq!(first, second);
    }
}

#[test]
fn config_reference_lists_every_default() {
    let doc = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("CONFIG.md")).unwrap();
    for key in viscowave_cli::config::defaults_table().keys() {
        assert!(doc.contains(&format!("| `{key}` |")), "CONFIG.md is missing {key}");
    }
}
