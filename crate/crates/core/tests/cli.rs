use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpi-inner"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn malformed_config_exits_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.toml",
        "n = 2\ndynamics = [\"-x1\", \"-x2 +\"]\nconstraints = [\"1 - x1^2 - x2^2\"]\nk_max = 2\n",
    );
    let out = run(&["--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2, column"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn order_below_constraint_degree_exits_2_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    // a quartic constraint needs k >= 2
    let cfg = write(
        dir.path(),
        "low.toml",
        "n = 2\ndynamics = [\"-x1\", \"-x2\"]\nconstraints = [\"1 - x1^4 - x2^4\"]\nball_radius = 1.5\nk_max = 1\n",
    );
    let out_dir = dir.path().join("o");
    let out = run(&["--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!out_dir.exists());
}

#[test]
fn unknown_flag_is_rejected() {
    let out = run(&["--config", "x.toml", "--colour"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bundled_contraction_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/contraction.toml");
    let out_dir = dir.path().join("c");
    let out = run(&["--config", cfg, "--degree", "2", "--no-validate", "--grid", "11", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["certificate_k2.json", "levelset_k2.csv", "summary.json"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    assert!(!out_dir.join("validation_k2.json").exists());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("Optimal"), "{stdout}");
    let csv = std::fs::read_to_string(out_dir.join("levelset_k2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 11 * 11);
}
