use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hcurl-ocp"));
    c.env_remove("HCURL_OCP_OUTPUT_DIR");
    c
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn csv_rows(path: &Path) -> Vec<String> {
    let text = fs::read_to_string(path).expect("csv exists");
    let mut lines = text.lines().map(str::to_owned);
    let header = lines.next().expect("header");
    assert!(header.starts_with("iter,dofs_state"));
    lines.collect()
}

/// Everything except the trailing wall-clock column.
fn without_seconds(rows: &[String]) -> Vec<String> {
    rows.iter().map(|r| r.rsplit_once(',').unwrap().0.to_owned()).collect()
}

#[test]
fn adaptive_lshape_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--problem", "lshape", "--mode", "adaptive", "--max-iters", "4", "-q"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("output/convergence.csv"));
    assert_eq!(rows.len(), 5);
    assert!(!dir.path().join("output/.hcurl-ocp.lock").exists());
}

#[test]
fn uniform_inclusion_has_initial_plus_two_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["run", "--problem", "inclusion", "--mode", "uniform", "--max-iters", "2", "-q"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("output/convergence.csv"));
    assert_eq!(rows.len(), 3);
    let dofs: Vec<usize> = rows.iter().map(|r| r.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(dofs[0], 604);
    assert!(dofs.windows(2).all(|w| w[1] > 6 * w[0]));
}

#[test]
fn runs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["run", "--max-iters", "5", "--output-dir", "a", "-q"], dir.path());
    let b = run(&["run", "--max-iters", "5", "--output-dir", "b", "-q"], dir.path());
    assert!(a.status.success() && b.status.success());
    let ra = csv_rows(&dir.path().join("a/convergence.csv"));
    let rb = csv_rows(&dir.path().join("b/convergence.csv"));
    assert_eq!(without_seconds(&ra), without_seconds(&rb));
}

#[test]
fn config_file_and_env_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "theta = 0.7\nmax_iterations = 2\noutput_dir = \"from_config\"\n").unwrap();
    let out = bin()
        .args(["run", "--config", "run.toml", "-q"])
        .env("HCURL_OCP_OUTPUT_DIR", "from_env")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(csv_rows(&dir.path().join("from_env/convergence.csv")).len(), 3);
    assert!(!dir.path().join("from_config").exists());
    // the command-line flag wins over the environment
    let out = bin()
        .args(["run", "--config", "run.toml", "--output-dir", "from_flag", "-q"])
        .env("HCURL_OCP_OUTPUT_DIR", "from_env")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from_flag/convergence.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["run", "--theta", "1.5"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&["run", "--mode", "sideways"], dir.path()).status.code(), Some(2));
    fs::write(dir.path().join("bad.toml"), "colour = 3\n").unwrap();
    let out = run(&["run", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour") && err.contains("theta"), "{err}");
    assert_eq!(run(&["run", "--problem", "no/such/problem.toml"], dir.path()).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("huge.toml"), "f_b = [1e308, 1e308, 1e308]\nmu_inv = 1e300\n").unwrap();
    let out = run(&["run", "--problem", "huge.toml", "-q"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn custom_problem_without_exact_solution() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("box.toml"), "f_b = [0.0, 0.0, 1.0]\nud_b = [1.0, -1.0, 0.5]\n").unwrap();
    let out = run(&["run", "--problem", "box.toml", "--max-iters", "2", "--vtk", "-q"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("output/convergence.csv"));
    assert_eq!(rows.len(), 3);
    assert!(rows[0].contains("NaN"));
    assert!(dir.path().join("output/vtk/level_002.vtk").exists());
}

#[test]
fn held_lock_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("output")).unwrap();
    fs::write(dir.path().join("output/.hcurl-ocp.lock"), "1\n").unwrap();
    let out = run(&["run", "--max-iters", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("in use"));
    assert!(!dir.path().join("output/convergence.csv").exists());
}

#[test]
fn check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["check"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 8);
}

#[test]
fn refine_demo_writes_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["refine-demo", "--steps", "3"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.trim_end().ends_with("true")).count(), 4);
    let vtk = fs::read_to_string(dir.path().join("output/refine_demo.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
    assert!(dir.path().join("output/refine_demo.mesh").exists());
    assert_eq!(run(&["refine-demo", "--fraction", "0"], dir.path()).status.code(), Some(2));
}
