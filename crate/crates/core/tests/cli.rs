use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn gradkit(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gradkit"));
    cmd.args(args);
    match seed {
        Some(s) => cmd.env("GRADKIT_SEED", s),
        None => cmd.env_remove("GRADKIT_SEED"),
    };
    cmd.output().expect("binary runs")
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("run.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn run_into(dir: &TempDir, config: &str, out: &str, seed: Option<&str>) -> Output {
    let out = dir.path().join(out);
    gradkit(
        &["run", config, "--out", out.to_str().unwrap(), "--no-timing"],
        seed,
    )
}

const SGD_QUADRATIC: &str =
    "[problem]\nkind = \"quadratic\"\ndim = 3\n\n[run]\nepochs = 20\n\n[optimizer.sgd]\n";

#[test]
fn single_sgd_run_writes_trace() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, SGD_QUADRATIC);
    let out = run_into(&dir, &config, "out", None);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let trace = fs::read_to_string(dir.path().join("out/trace_sgd.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("step,epoch,loss,grad_norm,update_norm,wall_s")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 20);
    assert!(
        rows.iter().all(|r| r.ends_with(',')),
        "wall_s is empty under --no-timing"
    );
    assert!(dir.path().join("out/summary.txt").exists());
}

#[test]
fn timing_column_filled_by_default() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, SGD_QUADRATIC);
    let out_dir = dir.path().join("timed");
    let out = gradkit(&["run", &config, "--out", out_dir.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(0));
    let trace = fs::read_to_string(out_dir.join("trace_sgd.csv")).unwrap();
    let walls: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(walls.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn ten_optimizer_summary() {
    let dir = TempDir::new().unwrap();
    let mut text = String::from(
        "[problem]\nkind = \"rosenbrock\"\n\n[run]\nepochs = 50\nthreshold_fraction = 0.5\n",
    );
    for name in [
        "sgd", "momentum", "nesterov", "adagrad", "adadelta", "rmsprop", "adam", "adamax", "nadam",
        "amsgrad",
    ] {
        text.push_str(&format!("\n[optimizer.{name}]\n"));
    }
    let config = write_config(&dir, &text);
    assert_eq!(run_into(&dir, &config, "out", None).status.code(), Some(0));
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(
        lines.next(),
        Some("algorithm,final_loss,test_loss,steps_to_threshold,wall_s,diverged")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 10);
    assert!(rows
        .iter()
        .all(|r| r.len() == 6 && r[1].parse::<f64>().is_ok() && r[2].is_empty()));
    assert_eq!(rows[0][0], "sgd");
    assert_eq!(rows[9][0], "amsgrad");
}

#[test]
fn unknown_algorithm_exits_2_and_names_it() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        &SGD_QUADRATIC.replace("optimizer.sgd", "optimizer.adamx"),
    );
    let out = run_into(&dir, &config, "out", None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("adamx"));
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = TempDir::new().unwrap();
    let config = write_config(&dir, &SGD_QUADRATIC.replace("epochs", "epoch_count"));
    let out = run_into(&dir, &config, "out", None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch_count"));
}

#[test]
fn io_failures_exit_3() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.toml");
    let out = gradkit(&["run", missing.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(3));

    let config = write_config(&dir, SGD_QUADRATIC);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "not a directory").unwrap();
    let out = gradkit(
        &[
            "run",
            &config,
            "--out",
            blocker.join("sub").to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(out.status.code(), Some(3));

    let idx = write_config(
        &dir,
        "[problem]\nkind = \"mlp\"\ntrain_images = \"/nonexistent/a\"\ntrain_labels = \"/nonexistent/b\"\n[optimizer.adam]\n",
    );
    assert_eq!(gradkit(&["run", &idx], None).status.code(), Some(3));
}

#[test]
fn divergence_is_a_result() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        "[problem]\nkind = \"rosenbrock\"\n[run]\nepochs = 100\n[optimizer.sgd]\nepsilon = 1e6\n",
    );
    let out = run_into(&dir, &config, "out", None);
    assert_eq!(out.status.code(), Some(0));
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().ends_with(",true"));
}

fn trace_bytes(dir: &Path) -> Vec<u8> {
    fs::read(dir.join("trace_adam.csv")).unwrap()
}

#[test]
fn seed_environment_override() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        &dir,
        "[problem]\nkind = \"logreg\"\nexamples = 300\nfeatures = 4\n[run]\nepochs = 2\nbatch_size = 50\nseed = 5\n[optimizer.adam]\n",
    );
    for (out, seed) in [("plain", None), ("five", Some("5")), ("six", Some("6"))] {
        assert_eq!(run_into(&dir, &config, out, seed).status.code(), Some(0));
    }
    let p = |d: &str| trace_bytes(&dir.path().join(d));
    assert_eq!(p("plain"), p("five"));
    assert_ne!(p("plain"), p("six"));
    assert_eq!(
        run_into(&dir, &config, "bad", Some("minus one"))
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn gradcheck_exit_codes() {
    let out = gradkit(&["gradcheck", "quadratic", "--trials", "10"], None);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        gradkit(&["gradcheck", "rosenbrok"], None).status.code(),
        Some(2)
    );

    let out = gradkit(&["gradcheck", "rosenbrock", "--trials", "100"], None);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let printed: f64 = stdout
        .split_whitespace()
        .skip_while(|w| *w != "error")
        .nth(1)
        .unwrap()
        .parse()
        .unwrap();
    assert!(printed < 1e-6, "{stdout}");
}

#[test]
fn list_and_usage() {
    let out = gradkit(&["list"], None);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text
        .lines()
        .any(|l| l.trim_start().starts_with("adadelta") && l.contains("rho=0.95")));
    assert!(text.contains("rosenbrock"));
    assert_eq!(gradkit(&["frobnicate"], None).status.code(), Some(2));
    assert_eq!(gradkit(&[], None).status.code(), Some(2));
}
