use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

#[derive(Parser)]
#[command(name = "histreg", version, about = "Histogram regression on individual stable sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a stable sequence and its stability diagnostic.
    Generate(Common),
    /// Run the stopping-time estimator over a sequence and score it.
    Estimate(Common),
    /// Splice a sequence on which a procedure fails to settle.
    Adversary(Common),
    /// Replay an estimator checkpoint or adversary report against its sequence.
    Verify(Common),
    /// Consistency curves over many seeds.
    Sweep(Common),
}

#[derive(Args, Clone)]
pub struct Common {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sequence length for generate and sweep, stall horizon for estimate,
    /// splice horizon for adversary.
    #[arg(long)]
    pub horizon: Option<usize>,
}

/// A failed run with its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

pub const EXIT_FAILED: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_GENERATOR: u8 = 3;
pub const EXIT_STALL: u8 = 4;
pub const EXIT_WITNESS: u8 = 5;
pub const EXIT_HORIZON: u8 = 6;

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Failure::new(EXIT_CONFIG, message)
    }

    pub fn failed(message: impl Into<String>) -> Self {
        Failure::new(EXIT_FAILED, message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(c) => commands::generate(c),
        Command::Estimate(c) => commands::estimate(c),
        Command::Adversary(c) => commands::adversary(c),
        Command::Verify(c) => commands::verify(c),
        Command::Sweep(c) => commands::sweep(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
