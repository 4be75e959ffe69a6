mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use georepair::ErrorKind;

use config::Options;

/// Geometric repair of scores for distributional group fairness.
#[derive(Parser)]
#[command(name = "georepair", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON file with default option values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Report failures as one JSON object on stderr
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand)]
enum Command {
    /// Write per-group rate curves and a disparity report
    Evaluate,
    /// Fit a repair plan and choose the repair amount
    Fit,
    /// Repair the scores of a CSV with a fitted plan
    Apply,
    /// Tabulate the objective over a grid of repair amounts
    LambdaSweep,
    /// Sample a synthetic dataset and split it into labeled and holdout parts
    Generate,
}

fn classify(err: &anyhow::Error) -> ErrorKind {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<georepair::Error>() {
            return e.kind();
        }
        if cause.is::<std::io::Error>() || cause.is::<tempfile::PersistError>() {
            return ErrorKind::Io;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if e.is_io_error() { ErrorKind::Io } else { ErrorKind::Validation };
        }
    }
    ErrorKind::Validation
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Solver => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.opts.merged(cli.config.as_deref()).and_then(|opts| match cli.command {
        Command::Evaluate => commands::evaluate(&opts),
        Command::Fit => commands::fit(&opts),
        Command::Apply => commands::apply(&opts),
        Command::LambdaSweep => commands::lambda_sweep(&opts),
        Command::Generate => commands::generate(&opts),
    });
    let Err(err) = result else { return ExitCode::SUCCESS };
    let kind = classify(&err);
    let code = exit_code(kind);
    if cli.json_errors {
        let body = serde_json::json!({
            "error": {
                "kind": format!("{kind:?}").to_lowercase(),
                "code": code,
                "message": format!("{err:#}"),
            }
        });
        eprintln!("{body}");
    } else {
        eprintln!("error: {err:#}");
    }
    ExitCode::from(code)
}
