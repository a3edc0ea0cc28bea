use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use romcut::pipeline::alloc::CountingAllocator;
use romcut::pipeline::{report, run_fom, run_offline, run_online, Config};
use romcut::RomError;

#[global_allocator]
static ALLOC: CountingAllocator = CountingAllocator;

#[derive(Parser)]
#[command(name = "romcut", version, about = "Localized reduced-order models on unfitted meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, clap::Args)]
struct Common {
    /// Configuration file (key = value).
    #[arg(long)]
    config: PathBuf,
    /// Parameter as "v1,v2".
    #[arg(long)]
    mu: Option<String>,
    /// Use the exact SVD instead of the randomized one.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Full-order solve at one parameter.
    Fom(Common),
    /// Snapshots and localized models for every tolerance.
    Offline(Common),
    /// Reduced solves and error metrics against the stored models.
    Online(Common),
    /// Rebuild report.txt from the stored metrics.
    Report(Common),
}

fn parse_mu(s: &str) -> Result<Vec<f64>, RomError> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| RomError::Config(format!("invalid parameter '{s}'")))).collect()
}

fn run(cli: Cli) -> Result<(), RomError> {
    let (Command::Fom(c) | Command::Offline(c) | Command::Online(c) | Command::Report(c)) = &cli.command;
    let mut cfg = Config::load(&c.config)?;
    if c.deterministic {
        cfg.deterministic = true;
    }
    let mu = c.mu.as_deref().map(parse_mu).transpose()?;
    match cli.command {
        Command::Fom(_) => {
            let s = run_fom(&cfg, mu)?;
            let dims: Vec<usize> = s.fields.iter().map(Vec::len).collect();
            println!("full-order solve done: field sizes {dims:?}; output in {}", cfg.output.join("fom").display());
        }
        Command::Offline(_) => {
            let out = run_offline(&cfg)?;
            let failed = out.bounds.iter().filter(|b| !b.holds()).count();
            println!(
                "offline done: {} snapshots in {:.2}s, {} models in {:.2}s, {} of {} accuracy bounds hold",
                out.samples.len(),
                out.snapshot_seconds,
                out.models.len(),
                out.model_seconds,
                out.bounds.len() - failed,
                out.bounds.len()
            );
        }
        Command::Online(_) => {
            let out = run_online(&cfg, mu)?;
            print!("{}", out.report);
        }
        Command::Report(_) => print!("{}", report(&cfg)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config_error() { 2 } else { 3 })
        }
    }
}
