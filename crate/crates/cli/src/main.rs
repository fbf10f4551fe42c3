//! `spintau`: batch front-end for spin invariants and Dirac eigenvalue
//! experiments on surfaces.
//!
//! Exit codes: 0 success, 1 numeric failure or flagged result, 2 usage error.

mod commands;
mod output;
mod params;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::json;

use commands::{dispatch, Context};
use output::Output;
use params::{load_json, Command};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(spintau_core::Error),
    Io(String),
}

impl From<spintau_core::Error> for CliError {
    fn from(e: spintau_core::Error) -> Self {
        match e {
            spintau_core::Error::Parse(m) => CliError::Usage(m),
            spintau_core::Error::Json(e) => CliError::Usage(e.to_string()),
            other => CliError::Numeric(other),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "spintau", version, about = "Spin invariants and Dirac eigenvalues of surfaces")]
struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "SPINTAU_OUTPUT_DIR", default_value = ".")]
    output_dir: PathBuf,
    /// Seed for randomised steps; overrides the solver seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exit 0 even when a result is flagged.
    #[arg(long, global = true)]
    allow_flags: bool,
    #[command(subcommand)]
    command: Entry,
}

#[derive(clap::Subcommand, Debug)]
enum Entry {
    /// Runs a JSON config `{command, params, output_dir, seed, allow_flags}`.
    Run { config: PathBuf },
    #[command(flatten)]
    Direct(Command),
}

/// A complete, reproducible invocation.
#[derive(Serialize, Deserialize, Debug)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(flatten)]
    command: Command,
    #[serde(default)]
    output_dir: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    allow_flags: bool,
}

/// What the output hash covers: everything that determines file contents.
#[derive(Serialize)]
struct HashedConfig<'a> {
    #[serde(flatten)]
    command: &'a Command,
    seed: Option<u64>,
}

fn resolve(cli: Cli) -> Result<(Command, PathBuf, Option<u64>, bool), CliError> {
    match cli.command {
        Entry::Direct(cmd) => Ok((cmd, cli.output_dir, cli.seed, cli.allow_flags)),
        Entry::Run { config } => {
            let rc: RunConfig = load_json(&config)?;
            Ok((
                rc.command,
                rc.output_dir.unwrap_or(cli.output_dir),
                cli.seed.or(rc.seed),
                cli.allow_flags || rc.allow_flags,
            ))
        }
    }
}

fn diagnostic(kind: &str, message: &str) {
    eprintln!("{}", json!({ "error": kind, "message": message }));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, dir, seed, allow_flags) = match resolve(cli) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    let hashed = serde_json::to_string(&HashedConfig { command: &command, seed }).expect("config serialises");
    let mut out = Output::new(&dir, &hashed);
    let mut ctx = Context { out: &mut out, seed };
    let report = match dispatch(&command, &mut ctx) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    for line in &report.summary {
        println!("{line}");
    }
    for p in out.written() {
        eprintln!("wrote {}", p.display());
    }
    match report.flagged {
        Some(flags) if !allow_flags => {
            eprintln!(
                "{}",
                json!({ "error": "flagged", "command": command.name(), "flags": flags, "config_sha256": out.hash() })
            );
            ExitCode::from(1)
        }
        _ => ExitCode::SUCCESS,
    }
}

fn fail(e: CliError) -> ExitCode {
    match e {
        CliError::Usage(m) => {
            diagnostic("usage", &m);
            ExitCode::from(2)
        }
        CliError::Numeric(err) => {
            diagnostic("numeric", &err.to_string());
            ExitCode::from(1)
        }
        CliError::Io(m) => {
            diagnostic("io", &m);
            ExitCode::from(1)
        }
    }
}
