use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lgc(dir: &Path, config: &str, extra: &[&str]) -> (Output, PathBuf) {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.join("out.csv");
    let output = Command::new(env!("CARGO_BIN_EXE_lgc"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    (output, out)
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn exponent_sweep_has_six_rows_and_zero_at_one() {
    let dir = TempDir::new().unwrap();
    let (o, out) = lgc(
        dir.path(),
        "command = exponent\nn = 8\nmu_grid = 1, 1.5, 2, 3, 4, 8\n",
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "mu,exponent,n,bound");
    let e = column(&csv, "exponent");
    assert_eq!(e.len(), 6);
    assert_eq!(e[0], 0.0);
    let b = column(&csv, "bound");
    assert!(b.windows(2).all(|w| w[1] < w[0]));
    assert!(out.with_extension("dat").exists());
    assert!(out.with_extension("manifest.json").exists());
}

#[test]
fn missing_lattice_file_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let (o, _) = lgc(
        dir.path(),
        "command = flatness\nlattice_file = nope.txt\nsigma = 1\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(
        String::from_utf8_lossy(&o.stderr).trim_end(),
        "config: lattice file not found"
    );
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let (o, _) = lgc(
        dir.path(),
        "command = flatness\nlattice = Z2\nsigma = 1\ncolour = red\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn flatness_too_large_is_a_numeric_error() {
    let dir = TempDir::new().unwrap();
    // σ₀/2 = 0.1 on Z⁸ gives ε far above 1
    let (o, _) = lgc(
        dir.path(),
        "command = rate\nlattice = Z8\nsigma0 = 0.2\nsigma = 0.1\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.starts_with("numeric: ") && err.trim_end().lines().count() == 1,
        "{err}"
    );
}

#[test]
fn simulate_writes_scheme_header() {
    let dir = TempDir::new().unwrap();
    let cfg = "command = simulate\nlattice = E8\nsigma0 = 3\nsigma = 0.9487\neps_dprime = 1.1\ntrials = 20000\nseed = 42\n";
    let (o, out) = lgc(dir.path(), cfg, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        lgc_core::scheme::SIM_CSV_HEADER
    );
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn rate_increases_along_snr_sweep() {
    let dir = TempDir::new().unwrap();
    let (o, out) = lgc(
        dir.path(),
        "command = rate\nlattice = E8\nsnr_grid = 3, 5, 10, 20\n",
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = column(&std::fs::read_to_string(&out).unwrap(), "rate_lower");
    assert_eq!(r.len(), 4);
    assert!(r.windows(2).all(|w| w[1] > w[0]), "{r:?}");
}

#[test]
fn flatness_decreases_along_sigma_sweep() {
    let dir = TempDir::new().unwrap();
    let (o, out) = lgc(
        dir.path(),
        "command = flatness\nlattice = Z8\nsigma_grid = 0.3, 0.4, 0.6, 1.0\n",
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = column(&std::fs::read_to_string(&out).unwrap(), "epsilon");
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
}

#[test]
fn two_sweep_axes_are_rejected() {
    let dir = TempDir::new().unwrap();
    let (o, _) = lgc(
        dir.path(),
        "command = rate\nlattice = E8\nsigma0_grid = 2, 3\nsigma_grid = 1, 2\n",
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn output_is_independent_of_thread_count() {
    let cfg = "command = sandwich\nlattice = E8\nsigma0 = 3\nsigma = 1\nmu = 2\ntrials = 100000\nseed = 7\n";
    let run = |threads: &str| {
        let dir = TempDir::new().unwrap();
        let (o, out) = lgc(dir.path(), cfg, &["--threads", threads]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn manifest_echoes_config_and_effective_settings() {
    let dir = TempDir::new().unwrap();
    let (o, out) = lgc(
        dir.path(),
        "command = sample\nlattice = D4\nsigma0 = 1.5\ncount = 50\n",
        &["--seed", "9"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(out.with_extension("manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(m["command"], "sample");
    assert_eq!(m["config"]["lattice"], "D4");
    assert_eq!(m["effective"]["seed"], 9);
    assert_eq!(m["rows"], 50);
    assert!(m["library_version"].is_string() && m["wall_time_seconds"].is_number());
    assert!(out.with_extension("spec.json").exists());
}
