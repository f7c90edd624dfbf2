//! `mocap-gapeval` command-line front end.

mod commands;
mod manifest;
mod plot;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mocap_gapeval::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e.root() {
                CoreError::InvalidArgument(_) => 2,
                CoreError::Numeric(_) | CoreError::Undefined(_) => 4,
                _ => 3,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "mocap-gapeval", version, about = "Missing-marker reconstruction evaluation for optical motion capture")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a clean synthetic marker sequence.
    Synth(commands::SynthArgs),
    /// Cut gaps into a clean sequence and optionally add noise.
    Corrupt(commands::CorruptArgs),
    /// Train a windowed ridge denoiser on a directory of clean sequences.
    Train(commands::TrainArgs),
    /// Fill the gaps of a corrupted sequence.
    Fill(commands::FillArgs),
    /// Score predictions with the metric suite.
    Eval(commands::EvalArgs),
    /// Correlate metric values with subjective ratings.
    Correlate(commands::CorrelateArgs),
    /// Render a markdown summary with SVG charts.
    Report(commands::ReportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let raw_args: Vec<String> = std::env::args().skip(1).collect();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a, &raw_args),
        Command::Corrupt(a) => commands::corrupt(&a, &raw_args),
        Command::Train(a) => commands::train(&a, &raw_args),
        Command::Fill(a) => commands::fill(&a, &raw_args),
        Command::Eval(a) => commands::eval(&a, &raw_args),
        Command::Correlate(a) => commands::correlate(&a, &raw_args),
        Command::Report(a) => commands::report(&a, &raw_args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
