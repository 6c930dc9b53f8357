use std::fs;
use std::path::Path;
use std::process::Command;

use scalcurv_cli::config::RunConfig;
use scalcurv_cli::io::{grid_from_csv, parse_report};
use scalcurv_cli::{run, EXIT_INPUT, EXIT_OK};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scalcurv"));
    c.env_remove("SCALCURV_OUT");
    c
}

fn report(dir: &Path) -> Vec<(String, String)> {
    parse_report(&fs::read_to_string(dir.join("report.txt")).unwrap())
}

fn get<'a>(r: &'a [(String, String)], key: &str) -> &'a str {
    &r.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("{key} missing")).1
}

#[test]
fn inverted_pinching_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["solve-entire", "--set", "barrier.h1=0.8", "--set", "barrier.h2=1.2", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INPUT));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("pinching"), "{err}");
}

#[test]
fn malformed_input_exits_one_and_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["solve-dirichlet", "--set", "domain.spacing=fast", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain.spacing"));

    assert_eq!(run(["scalcurv", "solve-entire", "--no-such-flag"]), EXIT_INPUT);
    assert_eq!(run(["scalcurv", "frobnicate"]), EXIT_INPUT);
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "solver.tolerance = 1e-9\n").unwrap();
    let out = bin().arg("verify").arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_INPUT));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.tolerance"));
}

#[test]
fn verify_with_default_seed_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().arg("verify").arg("--out").arg(dir.path()).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(EXIT_OK), "{stdout}");
    assert!(!stdout.contains("FAIL"));
    let csv = fs::read_to_string(dir.path().join("battery.csv")).unwrap();
    assert!(csv.starts_with("# scalcurv-cli"));
    assert_eq!(csv.lines().filter(|l| l.contains(",true,")).count(), 7);
}

#[test]
fn entire_run_reports_error_against_the_hyperboloid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# H = 1 in the plane\ncurvature.name = constant\ncurvature.params = 1\n\
         domain.r0 = 1\ndomain.schedule = 2,4\ndomain.spacing = 0.125\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let status = run([
        "scalcurv".as_ref(),
        "solve-entire".as_ref(),
        "--config".as_ref(),
        cfg.as_os_str(),
        "--out".as_ref(),
        out_dir.as_os_str(),
    ]);
    assert_eq!(status, EXIT_OK);
    for f in ["config.txt", "solution.csv", "stages.csv", "asymptotic.csv", "profile.csv", "report.txt", "manifest.txt"] {
        let text = fs::read_to_string(out_dir.join(f)).unwrap();
        assert!(text.starts_with("# scalcurv-cli"), "{f}");
        assert!(text.contains("config_sha256"), "{f}");
    }
    let r = report(&out_dir);
    let err: f64 = get(&r, "sup_error_vs_hyperboloid").parse().unwrap();
    assert!(err < 5e-2, "{err}");
    let u = grid_from_csv(&fs::read_to_string(out_dir.join("solution.csv")).unwrap()).unwrap();
    assert_eq!(u.spec().shape(), &[17, 17]);
    // The stored config reproduces the run's hash.
    let stored = RunConfig::parse(&fs::read_to_string(out_dir.join("config.txt")).unwrap()).unwrap();
    assert_eq!(stored.hash(), get(&r, "config_sha256"));
}

#[test]
fn identical_config_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--set",
        "curvature.name=sin-bump",
        "--set",
        "curvature.params=1,0.15",
        "--set",
        "domain.radius=2",
        "--set",
        "domain.spacing=0.125",
    ];
    for (sub, threads) in [("a", "1"), ("b", "3")] {
        let out = bin()
            .arg("solve-dirichlet")
            .args(args)
            .args(["--threads", threads, "--out"])
            .arg(dir.path().join(sub))
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(EXIT_OK));
    }
    for f in ["solution.csv", "residual_history.csv", "profile.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["oracle-radial", "--set", "curvature.name=radial-gauss", "--set", "curvature.params=1,0.1"])
        .env("SCALCURV_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let r = report(dir.path());
    assert!(get(&r, "residual").parse::<f64>().unwrap() < 1e-8);
    assert!(dir.path().join("radial_profile.csv").exists());
}

#[test]
fn barrier_files_feed_back_into_a_solve() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b");
    let common = ["--set", "domain.radius=2", "--set", "domain.spacing=0.125"];
    let status = bin()
        .arg("barriers")
        .args(common)
        .args(["--set", "barrier.kind=treibergs", "--set", "barrier.f.fourier=0,0.3,0", "--out"])
        .arg(&b)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    assert_eq!(get(&report(&b), "strictly_ordered"), "true");

    for (kind, lower, upper) in [
        ("spec-files", "lower.barrier", "upper.barrier"),
        ("grid-files", "lower.csv", "upper.csv"),
    ] {
        let out_dir = dir.path().join(kind);
        let out = bin()
            .arg("solve-dirichlet")
            .args(common)
            .arg("--set")
            .arg(format!("barrier.kind={kind}"))
            .arg("--set")
            .arg(format!("barrier.lower.file={}", b.join(lower).display()))
            .arg("--set")
            .arg(format!("barrier.upper.file={}", b.join(upper).display()))
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(EXIT_OK), "{kind}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(get(&report(&out_dir), "sandwich_violations"), "0");
    }
}
