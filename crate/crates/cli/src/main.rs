mod args;
mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::json;

use args::{Cli, Command};

/// Failures of a CLI invocation.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    /// Schema violation in a config file, with the path of the offending field.
    Config {
        field: String,
        message: String,
    },
    Io {
        path: PathBuf,
        message: String,
    },
    Core(bicomm::Error),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().to_path_buf(),
            message: e.to_string(),
        }
    }

    fn exit_code(&self) -> u8 {
        use bicomm::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 1,
            CliError::Io { .. } => 3,
            CliError::Core(e) => match e {
                E::Budget { .. } => 2,
                E::Io { .. } | E::Format { .. } => 3,
                _ => 1,
            },
        }
    }

    fn to_json(&self) -> serde_json::Value {
        use bicomm::Error as E;
        match self {
            CliError::Usage(m) => json!({"error": "usage", "message": m}),
            CliError::Config { field, message } => json!({"error": "config", "field": field, "message": message}),
            CliError::Io { path, message } => json!({"error": "io", "path": path, "message": message}),
            CliError::Core(e) => {
                let kind = match e {
                    E::Parameter(_) => "parameter",
                    E::Domain(_) => "domain",
                    E::EmptyCondition { .. } => "empty_condition",
                    E::Budget { .. } => "budget",
                    E::Format { .. } => "format",
                    E::Io { .. } => "io",
                    E::Config(_) => "config",
                    E::Bracket(_) => "bracket",
                };
                json!({"error": kind, "message": e.to_string()})
            }
        }
    }
}

impl From<bicomm::Error> for CliError {
    fn from(e: bicomm::Error) -> Self {
        CliError::Core(e)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Stat(a) => commands::stat(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Risk(a) => commands::risk(a),
        Command::Rates(a) => commands::rates(a),
        Command::Lb(a) => commands::lb(a),
        Command::Sweep(a) => commands::sweep(*a),
        Command::Phase(a) => commands::phase(a),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let message: Vec<&str> = rendered
                .lines()
                .map(str::trim)
                .take_while(|l| !l.starts_with("Usage:"))
                .filter(|l| !l.is_empty() && !l.starts_with("For more information"))
                .collect();
            let message = message.join(" ").trim_start_matches("error: ").to_string();
            return fail(&CliError::Usage(message));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
