use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use sigmak_cli::config::{parse_config_with, Mode, Overrides};
use sigmak_cli::run::{run, EXIT_CONFIG};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Solve,
    Eigen,
    Flow,
    Validate,
}

impl From<Command> for Mode {
    fn from(c: Command) -> Self {
        match c {
            Command::Solve => Mode::Solve,
            Command::Eigen => Mode::Eigen,
            Command::Flow => Mode::Flow,
            Command::Validate => Mode::Validate,
        }
    }
}

/// Solver for L_p sigma_k curvature problems on S^1 and S^2.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    command: Command,
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Allow non-even data in eigen mode.
    #[arg(long)]
    allow_non_even: bool,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", cli.config.display());
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let overrides = Overrides { mode: Some(cli.command.into()), allow_non_even: cli.allow_non_even, out_dir: cli.out };
    let cfg = match parse_config_with(&text, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for c in outcome.checks.iter().filter(|c| !c.satisfied) {
                println!("  check failed: {} ({:e} > {:e})", c.name, c.lhs, c.rhs);
            }
            println!("wrote {} files to {}", outcome.files.len(), cfg.out_dir.display());
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
