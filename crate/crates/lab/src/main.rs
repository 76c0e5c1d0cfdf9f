use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plap_lab::run::{load_configs, run_all, Command};

/// p-Laplacian evolution regularity lab.
///
/// Exit status: 0 success, 2 usage, 3 config error, 4 solver failure,
/// 5 probe failure, 6 i/o error, 7 validation failure.
#[derive(Parser)]
#[command(name = "plap", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Exponents, compatibility report and ε-layers (no grids).
    Exponent(Target),
    /// Admissible (q, r) region scan to region.csv (no grids).
    Region(Target),
    /// Solve and write solution.bin.
    Solve(Target),
    /// Solve, then profile the configured centres.
    Probe(Target),
    /// Built-in oracle suite.
    Validate(Target),
}

#[derive(Args)]
struct Target {
    /// JSON config: one experiment or an array of them.
    config: PathBuf,
    /// Output directory (overrides the config's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, target) = match cli.cmd {
        Sub::Exponent(t) => (Command::Exponent, t),
        Sub::Region(t) => (Command::Region, t),
        Sub::Solve(t) => (Command::Solve, t),
        Sub::Probe(t) => (Command::Probe, t),
        Sub::Validate(t) => (Command::Validate, t),
    };
    let result = load_configs(&target.config).and_then(|c| run_all(cmd, &c, target.out.as_deref()));
    match result {
        Ok(dirs) => {
            for d in dirs {
                println!("{}", d.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("plap {}: {e}", cmd.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
