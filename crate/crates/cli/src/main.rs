//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver failure,
//! 3 mesh inversion. `ALE_SEM_WORKERS` sets the worker-thread count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sem_ale::config::parse_config;
use sem_ale::exec::{init_workers, Exec};
use sem_ale::run::{parse_param, run, sweep};
use sem_ale::SemError;

const WORKERS_VAR: &str = "ALE_SEM_WORKERS";

#[derive(Parser)]
#[command(name = "sem-ale", version, about = "Spectral element ALE Navier-Stokes runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a run over a parameter range, e.g. `--param N=6..16:2`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<sem_ale::config::RunConfig, SemError> {
    let text = std::fs::read_to_string(path).map_err(|e| SemError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        SemError::Config(m) => SemError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn workers() -> Result<Option<usize>, SemError> {
    match std::env::var(WORKERS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(SemError::Config(format!("{WORKERS_VAR} must be a positive integer, got '{v}'"))),
        },
    }
}

fn execute(cli: Cli) -> Result<(), SemError> {
    let n = workers()?;
    init_workers(n);
    let exec = if n == Some(1) { Exec::Serial } else { Exec::Parallel };
    match cli.command {
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!("{}: valid {} configuration (sha256 {})", config.display(), cfg.scenario.name(), cfg.hash());
        }
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.out.clone());
            let o = run(&cfg, &dir, exec)?;
            println!("wrote {} files to {}", o.files.len() + 1, dir.display());
        }
        Command::Sweep { config, param, out } => {
            let cfg = load(&config)?;
            let (name, values) = parse_param(&param)?;
            let dir = out.unwrap_or_else(|| cfg.out.clone());
            let dirs = sweep(&cfg, &name, &values, &dir, exec)?;
            println!("wrote {} runs under {}", dirs.len(), dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
