use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_strongnf"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn decay_text() -> String {
    fs::read_to_string(configs().join("decay.toml")).unwrap()
}

#[test]
fn normalize_decay_config() {
    let out_dir = TempDir::new().unwrap();
    let out = run(&[
        "normalize",
        "--config",
        s(&configs().join("decay.toml")),
        "--out-dir",
        s(out_dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.path().join("iterations.csv")).unwrap();
    let rows = csv.lines().count() - 1;
    let n_trunc = 8f64;
    let bound = (n_trunc - 2.0).log2().ceil() as usize + 1;
    assert!(rows >= 1 && rows <= bound, "{rows} iterations");
    for f in ["problem.toml", "chain.toml", "summary.toml"] {
        assert!(out_dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn normalize_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let cfg = configs().join("bounded.toml");
    assert_eq!(
        code(&run(&[
            "normalize",
            "--config",
            s(&cfg),
            "--out-dir",
            s(a.path())
        ])),
        0
    );
    assert_eq!(
        code(&run(&[
            "normalize",
            "--config",
            s(&cfg),
            "--out-dir",
            s(b.path())
        ])),
        0
    );
    for f in [
        "iterations.csv",
        "chain.toml",
        "summary.toml",
        "problem.toml",
    ] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn written_problem_round_trips() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    assert_eq!(
        code(&run(&[
            "normalize",
            "--config",
            s(&configs().join("decay.toml")),
            "--out-dir",
            s(a.path())
        ])),
        0
    );
    let first = a.path().join("problem.toml");
    assert_eq!(
        code(&run(&[
            "normalize",
            "--config",
            s(&first),
            "--out-dir",
            s(b.path())
        ])),
        0
    );
    assert_eq!(
        fs::read(&first).unwrap(),
        fs::read(b.path().join("problem.toml")).unwrap()
    );
    assert_eq!(
        fs::read(a.path().join("iterations.csv")).unwrap(),
        fs::read(b.path().join("iterations.csv")).unwrap()
    );
}

#[test]
fn imaginary_spectrum_is_resonant() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(configs().join("bounded.toml"))
        .unwrap()
        .replace("re = \"-1.0\"\nim = \"0.0\"", "re = \"0.0\"\nim = \"1.0\"");
    let cfg = write_config(&dir, "resonant.toml", &text);
    let out = run(&["normalize", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("resonan"));
}

#[test]
fn missing_config_is_input_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&["normalize", "--config", s(&dir.path().join("nope.toml"))]);
    assert_eq!(code(&out), 1);
}

#[test]
fn malformed_number_is_input_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "bad.toml",
        &decay_text().replace("R0 = \"0.1\"", "R0 = \"0,1\""),
    );
    assert_eq!(
        code(&run(&[
            "normalize",
            "--config",
            s(&cfg),
            "--out-dir",
            s(dir.path())
        ])),
        1
    );
}

#[test]
fn verify_canonical_problem() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "verify",
        "--config",
        s(&configs().join("decay.toml")),
        "--x0",
        "1e-3",
        "--T",
        "5",
        "--steps",
        "1024",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in [
        "trajectory_numeric.csv",
        "trajectory_closed_form.csv",
        "error_report.csv",
        "verify_summary.toml",
    ] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
}

#[test]
fn verify_refuses_initial_state_outside_domain() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "verify",
        "--config",
        s(&configs().join("decay.toml")),
        "--x0",
        "0.2",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn verify_rejects_linear_perturbation() {
    let dir = TempDir::new().unwrap();
    let text = decay_text().replacen("alpha = [2]", "alpha = [1]", 1);
    let cfg = write_config(&dir, "linear.toml", &text);
    let out = run(&[
        "verify",
        "--config",
        s(&cfg),
        "--x0",
        "1e-3",
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 1);
}

#[test]
fn bounds_check_default_grid() {
    let dir = TempDir::new().unwrap();
    let out = run(&["bounds-check", "--out-dir", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let csv = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.contains(",true,")));
}

#[test]
fn bounds_check_reports_domain_error_rows() {
    let dir = TempDir::new().unwrap();
    let grid = write_config(
        &dir,
        "grid.toml",
        "[[weighted]]\nm = 3\nmu = \"1.0\"\ndelta = \"0.6\"\n",
    );
    let out = run(&[
        "bounds-check",
        "--config",
        s(&grid),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 1);
    let csv = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().contains(",false,"));
}

#[test]
fn sequences_above_threshold() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "sequences",
        "--config",
        s(&configs().join("decay.toml")),
        "--out-dir",
        s(dir.path()),
    ]);
    assert_eq!(code(&out), 2);
    let csv = fs::read_to_string(dir.path().join("sequences.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn sequences_below_threshold_writes_table() {
    let dir = TempDir::new().unwrap();
    let text = format!(
        "{}\n[sequences]\neps0 = \"1e-30\"\nj_max = 10\n",
        decay_text()
    );
    let cfg = write_config(&dir, "small.toml", &text);
    let out = run(&["sequences", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    assert!(
        matches!(code(&out), 0 | 3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.path().join("sequences.csv")).unwrap();
    assert_eq!(csv.lines().count(), 12);
}
