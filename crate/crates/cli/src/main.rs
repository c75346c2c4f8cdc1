use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sasaki_cli::{execute, parse_config, CliError, Command};

/// Sasaki-Ricci flow experiments on weighted 3-spheres.
#[derive(Parser)]
#[command(name = "sasaki", version)]
struct Args {
    command: Command,
    /// JSON configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the sampling seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: &Args) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text)?;
    if cfg.command != args.command {
        return Err(CliError::Config(format!(
            "command: configuration is for {:?}, invoked as {:?}",
            cfg.command, args.command
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
        for run in &mut cfg.runs {
            run.seed = seed;
        }
    }
    execute(&cfg, &args.out)
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&args) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("sasaki: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
