//! End-to-end checks of the command-line binary: verb plumbing, artifact
//! layout, exit codes, and the output-dir environment override.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_netnewton"))
}

fn write_config(dir: &Path, output: &Path) -> std::path::PathBuf {
    let path = dir.join("experiment.cfg");
    std::fs::write(
        &path,
        format!(
            "graph.kind = regular\n\
             graph.n = 6\n\
             graph.d = 3\n\
             graph.seed = 1\n\
             data.source = synthetic\n\
             data.m = 240\n\
             data.p = 4\n\
             data.seed = 7\n\
             objective.lambda = 0.05\n\
             algorithm.base.variant = newton\n\
             algorithm.base.alpha = 0.12\n\
             algorithm.hb.variant = newton_hb\n\
             algorithm.hb.alpha = 0.15\n\
             algorithm.hb.beta = 0.4\n\
             stopping.grad_tol = 1e-9\n\
             stopping.max_rounds = 400\n\
             output_dir = {}\n",
            output.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn run_verb_writes_artifacts_and_reports() {
    let dir = std::env::temp_dir().join("netnewton_bin_run");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("artifacts");
    let cfg = write_config(&dir, &out);

    let result = bin().arg("run").arg(&cfg).output().unwrap();
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("f* ="));
    assert!(stdout.contains("base"));
    assert!(stdout.contains("hb"));
    assert!(out.join("summary.csv").exists());
    assert!(out.join("trace_hb.csv").exists());
    assert!(out.join("trace_base.csv").exists());
    assert!(out.join("certificate.csv").exists());

    // rate verb on a produced trace
    let result = bin().arg("rate").arg(out.join("trace_hb.csv")).output().unwrap();
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("rho_hat"), "{stdout}");
}

#[test]
fn env_var_overrides_output_dir() {
    let dir = std::env::temp_dir().join("netnewton_bin_env");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let configured = dir.join("configured");
    let overridden = dir.join("overridden");
    let cfg = write_config(&dir, &configured);

    let result = bin()
        .arg("run")
        .arg(&cfg)
        .env("NETNEWTON_OUTPUT_DIR", &overridden)
        .output()
        .unwrap();
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    assert!(overridden.join("summary.csv").exists());
    assert!(!configured.exists(), "configured dir must be ignored under the override");
}

#[test]
fn certify_verb_prints_a_verdict() {
    let dir = std::env::temp_dir().join("netnewton_bin_certify");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_config(&dir, &dir.join("unused"));
    let result = bin()
        .args(["certify"])
        .arg(&cfg)
        .args(["--alpha", "0.15", "--beta", "0.5"])
        .output()
        .unwrap();
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("epsilon ="));
    assert!(stdout.contains("rho(M(alpha, beta))"));
    assert!(stdout.contains("CERTIFIED") || stdout.contains("UNCERTIFIED"));
}

#[test]
fn sweep_verb_runs_a_grid() {
    let dir = std::env::temp_dir().join("netnewton_bin_sweep");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = write_config(&dir, &dir.join("unused"));
    let grid = dir.join("grid.txt");
    std::fs::write(&grid, "newton 0.3 0\nnewton_hb 0.15 0.4\ngrad_track 10 0\n").unwrap();
    let result = bin().arg("sweep").arg(&cfg).arg("--grid").arg(&grid).output().unwrap();
    assert!(result.status.success(), "stderr: {}", String::from_utf8_lossy(&result.stderr));
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("newton_hb"));
    assert!(stdout.contains("diverged"), "the alpha = 10 row must be flagged: {stdout}");
}

#[test]
fn bad_inputs_exit_nonzero() {
    let result = bin().arg("run").arg("/definitely/not/a/file").output().unwrap();
    assert!(!result.status.success());
    let result = bin().arg("frobnicate").output().unwrap();
    assert!(!result.status.success());
}

#[test]
fn diverged_run_exits_nonzero_but_finishes_siblings() {
    let dir = std::env::temp_dir().join("netnewton_bin_diverged");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("artifacts");
    let cfg = dir.join("experiment.cfg");
    std::fs::write(
        &cfg,
        format!(
            "graph.kind = regular\n\
             graph.n = 6\n\
             graph.d = 3\n\
             graph.seed = 1\n\
             data.source = synthetic\n\
             data.m = 240\n\
             data.p = 4\n\
             data.seed = 7\n\
             objective.lambda = 0.05\n\
             algorithm.ok.variant = newton\n\
             algorithm.ok.alpha = 0.12\n\
             algorithm.wild.variant = newton\n\
             algorithm.wild.alpha = 50\n\
             stopping.grad_tol = 1e-9\n\
             stopping.max_rounds = 300\n\
             output_dir = {}\n",
            out.display()
        ),
    )
    .unwrap();
    let result = bin().arg("run").arg(&cfg).output().unwrap();
    assert_eq!(result.status.code(), Some(2), "divergence must surface in the exit code");
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("diverged@"));
    let ok_line = summary.lines().find(|l| l.starts_with("ok,")).unwrap();
    assert!(ok_line.contains("converged"), "healthy sibling still completes: {ok_line}");
}
