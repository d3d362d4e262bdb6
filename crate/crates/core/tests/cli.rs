use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use echopair::cli::{manifest_path, EXIT_CONFIG, EXIT_USAGE};

fn echopair(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_echopair"))
        .args(args)
        .output()
        .unwrap()
}

fn reference_config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../configs/reference.toml")
        .display()
        .to_string()
}

fn header(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .next()
        .unwrap_or_default()
        .to_string()
}

#[test]
fn csv_headers() {
    let cases: [(&[&str], &str); 6] = [
        (
            &["region", "--grid", "4x4"],
            "t_r_us,T_over_tau,g2_peak,nonclassical",
        ),
        (
            &["compare", "--mode", "depth", "--grid", "3x3"],
            "F,d_ge,ratio",
        ),
        (
            &["compare", "--mode", "modes", "--grid", "3x3"],
            "F,modes,ratio",
        ),
        (
            &["efficiency", "--steps", "4"],
            "d_ge,eta_forward,eta_backward",
        ),
        (&["correlation"], "t_us,p_s_as,g2"),
        (
            &["verify", "--atoms", "2000"],
            "quantity,analytic,oracle,rel_err,pass",
        ),
    ];
    for (args, expect) in cases {
        let out = echopair(args);
        assert_eq!(header(&out), expect, "{args:?}");
    }
}

#[test]
fn shipped_config_matches_builtin_reference() {
    let cfg = reference_config();
    for cmd in ["noise", "selection"] {
        let a = echopair(&[cmd]);
        let b = echopair(&["--config", &cfg, cmd]);
        assert!(a.status.success() && b.status.success());
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}

#[test]
fn region_writes_manifest_and_maxima() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("region.csv");
    let o = echopair(&[
        "region",
        "--dd",
        "--grid",
        "20x30",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 20 * 30);
    let manifest = fs::read_to_string(manifest_path(&out)).unwrap();
    assert!(manifest.contains("command = region"));
    assert!(manifest.contains("grid = 20x30"));
    assert!(manifest.contains("dd = true"));
    assert!(manifest.lines().last().unwrap().starts_with("timestamp = "));
    let maxima = fs::read_to_string(dir.path().join("region.maxima.csv")).unwrap();
    assert!(maxima.starts_with("quantity,closed_form,scan"));
}

#[test]
fn errors_are_single_machine_readable_lines() {
    let o = echopair(&["--config", "/definitely/missing.toml", "noise"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    let err = String::from_utf8_lossy(&o.stderr);
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("error kind=ConfigError"));

    let o = echopair(&["region", "--grid", "7"]);
    assert_eq!(o.status.code(), Some(EXIT_USAGE));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "d_ge = 1.0\n").unwrap();
    let o = echopair(&["--config", bad.to_str().unwrap(), "noise"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&o.stderr).contains("d_se"));
}

#[test]
fn unwritable_output_is_reported() {
    let o = echopair(&["noise", "--out", "/definitely/missing/dir/x.csv"]);
    assert_eq!(o.status.code(), Some(echopair::cli::EXIT_OUTPUT));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error kind=OutputIOError"));
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_echopair"))
            .env("ECHOPAIR_THREADS", threads)
            .args(["verify", "--atoms", "20000", "--seed", "3"])
            .output()
            .unwrap()
    };
    let one = run("1");
    let four = run("4");
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(run("zero").status.code(), Some(EXIT_USAGE));
}

#[test]
fn verify_failure_has_its_own_exit_code() {
    // two atoms cannot reproduce the continuum rates
    let o = echopair(&["verify", "--atoms", "2", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(echopair::cli::EXIT_VERIFICATION));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error kind=VerificationFailure"));
    assert_eq!(header(&o), "quantity,analytic,oracle,rel_err,pass");
}
