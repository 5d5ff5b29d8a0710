//! `dpg`: price options with the DPG solver from a JSON run config.
//!
//! Exit status: 0 on success, 1 for a bad command line or config, 2 for a
//! numerical or I/O failure.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use config::{Command, Format, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Environment variable read when `--threads` is not given.
const THREADS_ENV: &str = "DPG_THREADS";

#[derive(Parser)]
#[command(name = "dpg", version, about = "DPG option pricing")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.path`. Standard output if neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `output.format`.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; falls back to DPG_THREADS, then to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Price at the spot, with optional Greeks.
    Price(Common),
    /// Error table over successively doubled grids.
    Converge(Common),
    /// Delta, Gamma and requested sensitivities at every mesh node.
    Greeks(Common),
    /// DPG prices next to an oracle or published values.
    Compare(Common),
    /// Solution at every node and time level.
    Surface(Common),
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        match self {
            Failure::Config(m) => {
                eprintln!("config error: {m}");
                ExitCode::from(1)
            }
            Failure::Numerical(m) => {
                eprintln!("failed: {m}");
                ExitCode::from(2)
            }
        }
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, Failure> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| {
                Failure::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))
            })?),
            Err(_) => None,
        },
    };
    if n == Some(0) {
        return Err(Failure::Config("thread count must be positive".into()));
    }
    Ok(n)
}

fn run(command: Command, args: Common) -> Result<(), Failure> {
    let mut cfg = RunConfig::load(&args.config).map_err(|e| Failure::Config(e.0))?;
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    if let Some(dir) = args.out {
        cfg.output.path = Some(dir);
    }
    cfg.validate(command).map_err(|e| Failure::Config(e.0))?;
    if let Some(n) = threads(args.threads)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Numerical(format!("thread pool: {e}")))?;
    }

    let start = Instant::now();
    let table = match command {
        Command::Price => commands::price(&cfg),
        Command::Converge => commands::converge(&cfg),
        Command::Greeks => commands::greeks(&cfg),
        Command::Compare => commands::compare(&cfg),
        Command::Surface => commands::surface(&cfg),
    }
    .map_err(|e| Failure::Numerical(e.to_string()))?;
    let bytes = table.render(cfg.output.format, cfg.output.precision);

    match &cfg.output.path {
        Some(dir) => {
            let name = format!("{}.{}", command.name(), cfg.output.format.extension());
            let path = report::write_atomic(dir, &name, &bytes)
                .map_err(|e| Failure::Numerical(format!("writing {}: {e}", dir.display())))?;
            eprintln!("wrote {}", path.display());
        }
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| Failure::Numerical(format!("stdout: {e}")))?;
        }
    }
    eprintln!("{}: {:.3} s", command.name(), start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (command, args) = match cli.command {
        Sub::Price(a) => (Command::Price, a),
        Sub::Converge(a) => (Command::Converge, a),
        Sub::Greeks(a) => (Command::Greeks, a),
        Sub::Compare(a) => (Command::Compare, a),
        Sub::Surface(a) => (Command::Surface, a),
    };
    match run(command, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
