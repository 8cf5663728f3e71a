use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand};
use levolve::config::{check, validate_config};
use levolve::{run_experiment, write_artifacts};

#[derive(Parser)]
#[command(name = "levolve", version, about = "Run monitor experiments on evolving closed manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every monitor of a configuration and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Seed for multistart perturbations and random pairs.
        #[arg(long)]
        seed: Option<u64>,
        /// Mesh node count (overrides `geometry.nodes`).
        #[arg(long)]
        resolution: Option<usize>,
    },
    /// Parse and check a configuration without running it.
    Validate { config: PathBuf },
    /// List the built-in flow models and their parameters.
    ListFlows,
}

const FLOWS: &[(&str, &str, &str)] = &[
    ("static_flat_circle", "circumference (default 2π)", "flat circle, S = 0"),
    ("static_round_sphere", "radius (default 1)", "round sphere, S = 0"),
    ("ricci_round_sphere", "initial_radius (default 1)", "shrinking sphere, g = (r0² + 2τ)·g_unit, S = Ric"),
    ("dilaton_circle", "phi0_sq, coupling (default 1), winding (default 1)", "g = (φ0² − 2αc²τ)·dθ², S = −αc²·dθ²"),
    ("custom_tabulated", "table (path to a table file)", "tabulated metric and flow tensor on a circle"),
];

/// Caps the global worker pool when `LEVOLVE_THREADS` is set.
fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("LEVOLVE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| anyhow!("LEVOLVE_THREADS must be a positive integer, got `{raw}`"))?;
    if n == 0 {
        return Err(anyhow!("LEVOLVE_THREADS must be a positive integer, got 0"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the worker pool")?;
    Ok(())
}

fn run(config: PathBuf, out_dir: Option<PathBuf>, seed: Option<u64>, resolution: Option<usize>) -> Result<u8> {
    let mut cfg = validate_config(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(n) = resolution {
        cfg.geometry.nodes = n;
        check(&cfg)?;
    }
    let dir = out_dir.unwrap_or_else(|| cfg.output.dir.clone());
    let report = run_experiment(&cfg);
    write_artifacts(&report, &dir, cfg.output.plots)?;
    for m in &report.monitors {
        println!("{:4}  {} ({})", if m.passed() { "pass" } else { "FAIL" }, m.name, m.kind);
    }
    if let Some(e) = &report.error {
        eprintln!("error: {e}");
        eprintln!("partial report written to {}", dir.join("report.txt").display());
    } else {
        println!("report written to {}", dir.join("report.txt").display());
    }
    Ok(report.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Run { config, out_dir, seed, resolution } => run(config, out_dir, seed, resolution),
        Command::Validate { config } => validate_config(&config).map(|c| {
            println!("ok: {} monitors, {} measures", c.monitors.len(), c.measures.len());
            0
        }).map_err(Into::into),
        Command::ListFlows => {
            for (name, params, what) in FLOWS {
                println!("{name}\n    parameters: {params}\n    {what}");
            }
            Ok(0)
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
