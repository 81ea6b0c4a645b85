use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fracspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracspec"))
        .args(args)
        .env_remove("FRACSPEC_THREADS")
        .output()
        .unwrap()
}

fn scenario(name: &str) -> String {
    let p: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(format!("{name}.toml"));
    p.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn ml_prints_real_and_imaginary_parts() {
    let o = fracspec(&["ml", "--alpha", "2", "--re", "-1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let parts: Vec<f64> = out.trim().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(parts.len(), 2);
    assert!((parts[0] - 1f64.cos()).abs() < 1e-12 && parts[1].abs() < 1e-15, "{out}");
}

#[test]
fn verify_writes_outputs_and_reports_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fracspec(&["verify", "--config", &scenario("scalar_fractional"), "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    for key in [
        "hypotheses_hold",
        "boundary_spectrum",
        "ergodic_limits",
        "decay_verdict",
        "tail_estimate",
        "residual",
        "runtimes",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }
    assert_eq!(report["hypotheses_hold"], serde_json::Value::Bool(true));
    assert!(dir.path().join("u.csv").exists() && dir.path().join("spectrum.csv").exists());
}

#[test]
fn verify_several_configs_in_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_fracspec"))
        .args([
            "verify",
            "--config",
            &scenario("rotation"),
            &scenario("jordan"),
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("FRACSPEC_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("rotation/report.json").exists());
    assert!(dir.path().join("jordan/report.json").exists());
}

#[test]
fn spectrum_lists_boundary_points() {
    let o = fracspec(&["spectrum", "--config", &scenario("rotation")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("xi,reason"));
    let row = lines.next().unwrap();
    assert!(row.split(',').next().unwrap().parse::<f64>().unwrap() == 1.0, "{out}");
}

#[test]
fn errors_exit_with_one() {
    assert_eq!(
        fracspec(&["verify", "--config", "/nonexistent/config.toml", "--out", "/tmp"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(fracspec(&["bogus"]).status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_fracspec"))
        .args(["ml", "--alpha", "0.5", "--re", "-1"])
        .env("FRACSPEC_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn falsification_exits_with_two() {
    // empty boundary spectrum, but e^(-t/1000) cannot decay within the grid
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("slow.toml");
    std::fs::write(
        &cfg,
        "alpha = 1.0\nmatrix = \"-0.001\"\nx0 = \"1\"\nforcing.kind = \"zero\"\ngrid.t_max = 100.0\ngrid.steps = 1600\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = fracspec(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let report = std::fs::read_to_string(out.join("report.json")).unwrap();
    assert!(report.contains("\"NotDecayed\""));
}
