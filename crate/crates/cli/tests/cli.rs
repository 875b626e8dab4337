use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_holonomy"));
    c.env_remove("HOLONOMY_OUT_DIR");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn flat_transport_passes_with_identity() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("flat_transport.toml");
    let o = run(&["transport", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("pass  transport.identity_residual"), "{out}");
    assert!(dir.path().join("transport.csv").exists());
    assert_eq!(fs::read_to_string(dir.path().join("report.txt")).unwrap(), out);
}

#[test]
fn convergence_table_has_first_order_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("convergence.toml");
    let o = run(&["convergence", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // refit the slope from the CSV alone
    let text = fs::read_to_string(dir.path().join("convergence.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,error"));
    let pts: Vec<(f64, f64)> = lines
        .map(|l| {
            let (n, e) = l.split_once(',').unwrap();
            ((n.parse::<f64>().unwrap()).ln(), e.parse::<f64>().unwrap().ln())
        })
        .collect();
    assert_eq!(pts.len(), 9);
    assert_eq!(pts[0].0, 16f64.ln());
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = -sxy / sxx;
    assert!((0.9..=1.1).contains(&slope), "{slope}");
}

#[test]
fn unknown_preset_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "kind = \"transport\"\n[connection]\npreset = \"yang-mills\"\n[path]\nkind = \"circle\"\n").unwrap();
    let o = run(&["transport", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("preset") && err.contains("yang-mills"), "{err}");
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn mismatched_subcommand_exits_2() {
    let cfg = configs().join("flat_transport.toml");
    let o = run(&["holonomy", "-c", cfg.to_str().unwrap(), "-o", "/nonexistent-unused"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`kind`"));
}

#[test]
fn failing_check_exits_1_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sphere_holonomy.toml");
    let o = run(&[
        "holonomy",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
        "--tol",
        "holonomy.angle_error=1e-30",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("failed check: holonomy.angle_error"));
}

#[test]
fn numerical_failure_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("open.toml");
    // the snake needs a loop
    fs::write(
        &cfg,
        "kind = \"bordism\"\n[bundle]\nmanifold = \"sphere\"\n[path]\nkind = \"arc\"\ncenter = [0.0, 0.0, 0.0]\nradius = 1.0\ne1 = [0.0, 0.0, 1.0]\ne2 = [0.0, 1.0, 0.0]\ndomain = [0.0, 1.0]\n[word]\nkind = \"snake\"\n",
    )
    .unwrap();
    let o = run(&["bordism", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stdout(&o).contains("bordism.snake_residual: error"));
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("sphere_holonomy.toml");
    let o = bin()
        .args(["holonomy", "-c", cfg.to_str().unwrap()])
        .env("HOLONOMY_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("holonomy.csv").exists());
}

#[test]
fn echoed_config_reparses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("braid.toml");
    let o = run(&["bordism", "-c", cfg.to_str().unwrap(), "-o", dir.path().to_str().unwrap(), "-s", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("[word.paths.a]"));
    let reparsed = holonomy::experiment::ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    let mut original = holonomy::experiment::ExperimentConfig::load(&cfg).unwrap();
    original.seed = 5;
    assert_eq!(reparsed, original);
}

#[test]
fn verify_all_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = run(&["verify-all", "--seed", "3", "-o", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert_eq!(stdout(&o).matches("PASS [").count(), 8);
    }
    let csv = |d: &tempfile::TempDir| fs::read(d.path().join("verify.csv")).unwrap();
    assert_eq!(csv(&a), csv(&b));
}
