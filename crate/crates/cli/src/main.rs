//! `holonomy <kind> [--config FILE] [--out-dir DIR] [--seed N] [--tol NAME=VALUE]...`
//!
//! Exit status: 0 when every check passes, 1 on a failed check or numerical
//! failure, 2 on a config error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use holonomy::experiment::{run_experiment, ExperimentConfig, ExperimentKind, RunError};

#[derive(Parser)]
#[command(name = "holonomy", version, about = "Parallel transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transport along a path by RK4 or the product formula.
    Transport(Common),
    /// Product-formula error against a reference, over a sweep of N.
    Convergence(Common),
    /// Recover a connection from its transport.
    Reconstruct(Common),
    /// Glued holonomy of a loop in a global bundle.
    Holonomy(Common),
    /// Evaluate a bordism word.
    Bordism(Common),
    /// Run every acceptance criterion.
    VerifyAll(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; optional for verify-all.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `output.dir`.
    #[arg(short, long, env = "HOLONOMY_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Random seed; overrides the config's `seed`.
    #[arg(short, long)]
    seed: Option<u64>,
    /// Threshold override, e.g. `--tol transport.cocycle_residual=1e-9`.
    #[arg(long = "tol", value_name = "NAME=VALUE", value_parser = parse_tol)]
    tol: Vec<(String, f64)>,
}

fn parse_tol(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected NAME=VALUE")?;
    let v: f64 = v.trim().parse().map_err(|e| format!("{v}: {e}"))?;
    if !v.is_finite() {
        return Err("tolerance must be finite".into());
    }
    Ok((k.trim().to_string(), v))
}

fn load(kind: ExperimentKind, args: &Common) -> Result<(ExperimentConfig, PathBuf), RunError> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None if kind == ExperimentKind::VerifyAll => ExperimentConfig::new(kind),
        None => return Err(RunError::Config { key: "--config".into(), message: format!("{kind} needs a config file") }),
    };
    match cfg.kind {
        Some(k) if k != kind => {
            return Err(RunError::Config {
                key: "kind".into(),
                message: format!("config is for `{k}` but the subcommand is `{kind}`"),
            })
        }
        _ => cfg.kind = Some(kind),
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.tolerances.extend(args.tol.iter().cloned());
    let out = args.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    Ok((cfg, out))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Transport(a) => (ExperimentKind::Transport, a),
        Command::Convergence(a) => (ExperimentKind::Convergence, a),
        Command::Reconstruct(a) => (ExperimentKind::Reconstruct, a),
        Command::Holonomy(a) => (ExperimentKind::Holonomy, a),
        Command::Bordism(a) => (ExperimentKind::Bordism, a),
        Command::VerifyAll(a) => (ExperimentKind::VerifyAll, a),
    };
    let result = load(kind, args).and_then(|(cfg, out)| run_experiment(&cfg, &out));
    match result {
        Ok(report) => {
            print!("{}", report.render());
            for c in report.failing() {
                eprintln!("failed check: {}", c.name);
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("holonomy: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
