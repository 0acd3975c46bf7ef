mod args;
mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;
use serde::Serialize;

use args::Cli;
use dpforest::ErrorClass;

/// A failed run: message for stderr plus the class that picks the exit code.
#[derive(Debug)]
pub struct Failure {
    pub class: ErrorClass,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            class: ErrorClass::Usage,
            message: message.into(),
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Failure {
            class: ErrorClass::Validation,
            message: message.into(),
        }
    }

    fn exit_code(&self) -> u8 {
        match self.class {
            ErrorClass::Usage => 1,
            ErrorClass::Validation => 2,
            ErrorClass::Internal => 3,
        }
    }
}

impl From<dpforest::Error> for Failure {
    fn from(e: dpforest::Error) -> Self {
        Failure {
            class: e.class(),
            message: e.to_string(),
        }
    }
}

/// What a subcommand produced, for the manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub seed: Option<u64>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    args: &'a args::Command,
    threads: usize,
    seed: Option<u64>,
    artifacts: &'a [PathBuf],
    duration_seconds: f64,
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    std::fs::write(path, contents)
        .map_err(|e| Failure::validation(format!("{}: {e}", path.display())))
}

fn manifest_path(cli: &Cli, outcome: &Outcome) -> Option<PathBuf> {
    cli.manifest.clone().or_else(|| {
        outcome.artifacts.first().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot set up {} threads: {e}", cli.threads)))?;
    }
    let outcome = commands::dispatch(&cli.command)?;
    if let Some(path) = manifest_path(cli, &outcome) {
        let manifest = RunManifest {
            subcommand: cli.command.name(),
            args: &cli.command,
            threads: cli.threads,
            seed: outcome.seed,
            artifacts: &outcome.artifacts,
            duration_seconds: start.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&manifest).map_err(|e| Failure {
            class: ErrorClass::Internal,
            message: e.to_string(),
        })?;
        write_file(&path, &json)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.exit_code())
        }
    }
}
