//! End-to-end runs of the command-line binary.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cavity-fort"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn steady_output_is_reproducible_without_timestamp() {
    let args = ["--scenario", "case-a", "--no-timestamp", "steady", "--g", "0", "--s", "0"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("# cavity-fort "));
    assert!(text.contains("1.00082838e-2"), "{text}");
    assert!(!text.contains("generated_unix"));
}

#[test]
fn timestamp_header_is_on_by_default() {
    let o = run(&["--scenario", "case-a", "steady", "--g", "0", "--s", "0"]);
    assert!(stdout(&o).contains("# generated_unix="));
}

#[test]
fn dumped_config_reproduces_itself() {
    let dir = tempfile::tempdir().unwrap();
    let first = run(&["--scenario", "case-b-lg012", "--dt", "0.004", "--seed", "9", "--dump-config", "steady", "--g", "0", "--s", "0"]);
    assert_eq!(first.status.code(), Some(0));
    let path = dir.path().join("run.toml");
    std::fs::write(&path, &first.stdout).unwrap();
    let second = run(&["--config", path.to_str().unwrap(), "--dump-config", "steady", "--g", "0", "--s", "0"]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(stdout(&first), stdout(&second));
    assert!(stdout(&first).contains("case-b-lg012"));
}

#[test]
fn seeded_trajectory_is_byte_identical() {
    let args = [
        "--scenario", "case-b", "--no-cache", "--no-timestamp", "--seed", "7", "--t-max", "0.5",
        "simulate", "--stride", "10",
    ];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let data_rows = stdout(&a).lines().filter(|l| !l.starts_with('#')).count();
    assert!(data_rows > 5);
}

#[test]
fn output_directory_receives_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--scenario", "case-a", "--output-dir", dir.path().to_str().unwrap(),
        "steady", "--g", "10", "--s", "0",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn usage_and_domain_errors_have_distinct_codes() {
    assert_eq!(run(&["--scenario", "case-z", "steady", "--g", "0", "--s", "0"]).status.code(), Some(2));
    assert_eq!(run(&["steady", "--g", "0"]).status.code(), Some(2));
    assert_eq!(run(&["--dt=-1", "simulate"]).status.code(), Some(2));
    assert_eq!(run(&["--n-g", "3", "coeffs"]).status.code(), Some(2));
    assert_eq!(run(&["--scenario", "case-a", "steady", "--g", "1e9", "--s", "0"]).status.code(), Some(1));
}
