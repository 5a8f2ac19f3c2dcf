use std::process::{Command, Output};

use solvctrl_cli::examples;
use solvctrl_cli::sysfile::SystemFile;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solvctrl"))
        .args(args)
        .env_remove("SOLVCTRL_SEED")
        .output()
        .expect("binary runs")
}

#[test]
fn example_output_parses_back() {
    let out = run(&["example", "euclid-like"]);
    assert!(out.status.success());
    let f = SystemFile::parse(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(f, examples::lookup("euclid-like").unwrap());
}

#[test]
fn analyze_reports_kernel_split() {
    let out = run(&["analyze", "@euclid-like"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kernel_split"]["dim_g0"], 1);
}

#[test]
fn malformed_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[algebra]\ndim = 3\nbogus = 1\n").unwrap();
    let out = run(&["analyze", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line"));
}

#[test]
fn unknown_builtin_is_a_usage_error() {
    assert_eq!(run(&["analyze", "@nothing"]).status.code(), Some(2));
}

#[test]
fn resonant_seed_time_is_a_guard_stop() {
    let period = std::f64::consts::TAU.to_string();
    let out = run(&["seed", "@rotation", "--time", &period]);
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn export_plots_writes_gnuplot_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = run(&["reach", "@heisenberg3", "--budget", "100", "--out-dir", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let estimate = dir.path().join("estimate.json");
    let out = run(&["export-plots", estimate.to_str().unwrap(), "--out-dir", d]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["inliers.dat", "seeds.dat", "plot.gp"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}
