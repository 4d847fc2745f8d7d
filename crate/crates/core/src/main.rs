use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use heraldsim::harness::{check_lines, parse_config_for, run_scenario_with, Emit, Scenario};
use heraldsim::{Error, Result};

/// Heralded spin entanglement of two cavity-coupled quantum dots.
#[derive(Parser)]
#[command(version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("HERALDSIM_GIT_DESCRIBE"), ")"))]
struct Cli {
    scenario: Scenario,

    /// Config file of `section.key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed of the trajectory ensemble
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,

    /// Trajectories per ensemble
    #[arg(long)]
    n_traj: Option<usize>,

    #[arg(long)]
    emit: Option<Emit>,
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("HERALDSIM_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| Error::Config {
        line: 0,
        message: format!("HERALDSIM_THREADS must be a positive integer, got `{v}`"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Structure(e.to_string()))
}

fn run(cli: Cli) -> Result<i32> {
    configure_threads()?;
    let text = match &cli.config {
        Some(path) => std::fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            message: format!("cannot read {}: {e}", path.display()),
        })?,
        None => String::new(),
    };
    let mut cfg = parse_config_for(&text, Some(cli.scenario))?;
    cfg.apply_cli(cli.seed, cli.out, cli.n_traj, cli.emit)?;
    for line in &cfg.report {
        eprintln!("config: {line}");
    }
    let start = Instant::now();
    let log = move |msg: &str| eprintln!("[{:>8.1}s] {msg}", start.elapsed().as_secs_f64());
    let out = run_scenario_with(&cfg, &log)?;
    for line in check_lines(&out.gates) {
        eprintln!("gate: {line}");
    }
    for line in check_lines(&out.checks) {
        println!("{line}");
    }
    for w in out.all_warnings() {
        eprintln!("warning: {w}");
    }
    for path in out.write(&cfg)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(out.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
