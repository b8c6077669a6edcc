//! `axihee`: runs scenarios, sweeps and the self-check of the numerical laboratory.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use axihee_cli::check;
use axihee_cli::config::{parse_config, ScenarioConfig};
use axihee_cli::scenario::{run_scenario, write_timing, Failure};
use axihee_cli::sweep::{parse_values, sweep, Axis};

#[derive(Debug, Parser)]
#[command(name = "axihee", version, about = "Axisymmetric hydrostatic Euler experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory; overrides `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for randomized corpora.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (default: available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Run a scenario once per value of one axis and compare the results.
    Sweep {
        config: PathBuf,
        /// One of N, dt, resolution, eps.
        #[arg(long)]
        axis: Axis,
        /// Comma-separated, sorted values; for the eps axis defaults to `eps_list`.
        #[arg(long, value_parser = parse_values, default_value = "")]
        values: std::vec::Vec<f64>,
    },
    /// Calculus suite plus the structural-invariant corpus.
    Check,
}

fn load(path: &Path, out: &Option<PathBuf>) -> Result<(ScenarioConfig, PathBuf), Failure> {
    let cfg = parse_config(path).map_err(|e| Failure::Validation(e.0))?;
    let dir = out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    Ok((cfg, dir))
}

fn execute(cli: &Cli) -> Result<u8, Failure> {
    let t0 = Instant::now();
    match &cli.command {
        Command::Run { config } => {
            let (cfg, out) = load(config, &cli.out)?;
            let res = run_scenario(&cfg, &out, cli.seed).map_err(|f| f.context(&config.display().to_string()))?;
            write_timing(&out, t0.elapsed().as_secs_f64(), None)?;
            println!("{} {}: {:?}, files in {}", cfg.kind, config.display(), res.status, out.display());
            Ok(res.status.exit_code())
        }
        Command::Sweep { config, axis, values } => {
            let (cfg, out) = load(config, &cli.out)?;
            let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let rep = sweep(&cfg, *axis, values, &out, cli.seed, threads).map_err(|f| f.context(&config.display().to_string()))?;
            for c in &rep.children {
                println!("{:>12e}  exit {}  {}", c.value, c.exit_code, c.error.as_deref().unwrap_or(""));
            }
            match rep.fitted_order {
                Some(o) => println!("fitted order {o:.3}"),
                None => println!("fitted order unavailable"),
            }
            Ok(rep.exit_code)
        }
        Command::Check => {
            let rep = check::run_check(cli.seed, cli.out.as_deref())?;
            for line in rep.lines() {
                println!("{line}");
            }
            Ok(if rep.passed { 0 } else { 5 })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
