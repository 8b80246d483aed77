use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod run;

use run::{Command, RunConfig};

/// Decay certificates, simulation and verification for delay equations.
#[derive(Debug, Parser)]
#[command(name = "decaycert", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if absent.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Dotted `key=value` override, applied after the file is parsed.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = RunConfig {
        command: cli.command,
        input_path: cli.config,
        output_dir: cli.out,
        seed: cli.seed,
        overrides: cli.overrides,
    };
    match run::run(&cfg) {
        Ok(status) => {
            println!("{}", status.summary);
            ExitCode::from(status.code())
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(2)
        }
    }
}
