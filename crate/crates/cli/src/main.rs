use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use hyperbary_cli::checks::CaseFailure;
use hyperbary_cli::config::{Command, RunConfig};
use hyperbary_cli::run::{load_json, Malformed, Run};

/// Hyperbolic barycenters, circumcenters and boundary-map extensions.
///
/// Exit status: 0 all checks passed, 1 an audit failed, 2 invalid input
/// (malformed JSON is reported with line and column), 3 a solver did not
/// converge (the case is written to failure.json), 4 an I/O error.
#[derive(Parser, Debug)]
#[command(name = "hyperbary", version)]
struct Cli {
    /// Command to run; defaults to the `command` field of the config.
    command: Option<Command>,
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Boundary grid resolution: atoms on the circle, scaled up in higher
    /// dimensions.
    #[arg(long)]
    grid: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Multiplies every audit tolerance.
    #[arg(long)]
    tolerance_scale: Option<f64>,
}

fn setup(cli: Cli) -> anyhow::Result<Run> {
    let mut config = match &cli.config {
        Some(path) => {
            let mut c: RunConfig = load_json(path)?;
            let dir = path.parent().map(PathBuf::from).unwrap_or_default();
            c.resolve_inputs(&dir);
            c
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(g) = cli.grid {
        config.grid_n = g;
    }
    if let Some(t) = cli.tolerance_scale {
        config.tolerance_scale = t;
    }
    let command = cli
        .command
        .or(config.command)
        .context("no command given on the command line or in the config")?;
    let out = cli
        .out
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Run::new(config, command, out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match setup(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    match run.execute() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("audit failed; see reports in {}", run.out.display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(f) = e.downcast_ref::<CaseFailure>() {
                match run.dump_failure(f) {
                    Ok(path) => eprintln!("failing case written to {}", path.display()),
                    Err(w) => eprintln!("could not write failing case: {w:#}"),
                }
                ExitCode::from(3)
            } else if e.downcast_ref::<Malformed>().is_some() {
                ExitCode::from(2)
            } else if e.downcast_ref::<std::io::Error>().is_some() {
                ExitCode::from(4)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
