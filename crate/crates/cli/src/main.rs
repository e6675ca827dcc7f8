//! `seqstop`: solve, verify and simulate the catalog stopping problems from a
//! TOML run configuration.

mod commands;
mod config;
mod custom;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Ctx, Failure};
use config::Overrides;

#[derive(Parser)]
#[command(name = "seqstop", version, about = "Multi-dimensional sequential testing and quickest detection laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Nodes per axis; overrides `grid.nodes`.
    #[arg(long, global = true)]
    grid: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the obstacle problem; writes value.csv, boundary.csv, solve_report.json.
    Solve,
    /// Solve and run the verification suite; writes manifest.json.
    Verify,
    /// Monte Carlo estimates for a stopping rule; writes estimate.json.
    Simulate,
    /// Merge manifest.json files found under the given paths into report.json.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    let ctx = Ctx { quiet: cli.quiet };
    let ov = Overrides { out: cli.out.clone(), seed: cli.seed, nodes: cli.grid };
    if let Command::Report { inputs } = &cli.command {
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        return match commands::cmd_report(inputs, &out, &ctx)? {
            0 => Ok(()),
            n => Err(Failure::Checks(n)),
        };
    }
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config is required".into()))?;
    let runs = config::load(path, &ov).map_err(|e| Failure::Config(e.to_string()))?;
    let mut failed = 0;
    let mut stalled = None;
    for cfg in &runs {
        match &cli.command {
            Command::Solve => match commands::cmd_solve(cfg, &ctx) {
                Err(Failure::NonConvergence(msg)) => stalled = Some(msg),
                other => other?,
            },
            Command::Verify => failed += commands::cmd_verify(cfg, &ctx)?,
            Command::Simulate => commands::cmd_simulate(cfg, &ctx)?,
            Command::Report { .. } => unreachable!(),
        }
    }
    if let Some(msg) = stalled {
        return Err(Failure::NonConvergence(msg));
    }
    if failed > 0 {
        return Err(Failure::Checks(failed));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(msg) => eprintln!("error: {msg}"),
                Failure::NonConvergence(msg) => eprintln!("solver did not converge: {msg}"),
                Failure::Checks(n) => eprintln!("{n} check(s) failed"),
            }
            ExitCode::from(f.exit_code())
        }
    }
}
