use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

use commands::{EvalArgs, GenArgs, RunArgs, SizeArgs, TrainArgs};

/// Flow telemetry pipeline emulator and KNN DDoS detector.
#[derive(Debug, Parser)]
#[command(name = "flowtel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a labeled synthetic trace.
    Gen(GenArgs),
    /// Run a trace through the pipeline and write the per-flow dataset.
    Run(RunArgs),
    /// Fit a KNN model from a dataset.
    Train(TrainArgs),
    /// Classify the flows of a trace and report detection metrics.
    Eval(EvalArgs),
    /// Register sizing from the collision probability.
    Size(SizeArgs),
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Io(m) => m,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => commands::gen(&a),
        Command::Run(a) => commands::run(&a),
        Command::Train(a) => commands::train(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Size(a) => commands::size(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
