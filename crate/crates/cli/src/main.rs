//! `mdisc`: build low-discrepancy sets, hard halfspaces and circulant expanders,
//! write them as JSON certificates, and verify certificates independently.
//!
//! Exit codes: 0 success, 1 verification failure, 2 argument or input error,
//! 3 I/O failure.

mod commands;
mod document;
mod verify;

use clap::Parser;
use commands::{execute, Artifact, Command};
use document::{sha256_hex, Document, Envelope, FileDigest, RunManifest};
use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "mdisc", version, about = "Low-discrepancy sets, hard halfspaces and circulant expanders, with certificates")]
pub struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write a run manifest that `verify` can replay.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Argument(String),
    #[error("{0}")]
    Io(String),
    #[error("verification failed: {0} check(s)")]
    Verification(usize),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Argument(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn emit(artifacts: &[Artifact]) -> Result<(), CliError> {
    for a in artifacts {
        match &a.path {
            Some(p) => write_atomic(p, &a.bytes)?,
            None => std::io::stdout()
                .write_all(&a.bytes)
                .map_err(|e| CliError::Io(format!("stdout: {e}")))?,
        }
    }
    Ok(())
}

/// Command-line arguments with the global flags and their values removed.
fn replay_argv() -> Vec<String> {
    let mut out = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--threads" || a == "--manifest" {
            args.next();
        } else if !(a.starts_with("--threads=") || a.starts_with("--manifest=")) {
            out.push(a);
        }
    }
    out
}

fn painted(ok: bool) -> &'static str {
    let color = std::env::var_os("NO_COLOR").is_none() && std::io::stdout().is_terminal();
    match (ok, color) {
        (true, true) => "\x1b[32mPASS\x1b[0m",
        (false, true) => "\x1b[31mFAIL\x1b[0m",
        (true, false) => "PASS",
        (false, false) => "FAIL",
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Argument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Argument(format!("--threads: {e}")))?;
    }
    if let Command::Verify(a) = &cli.command {
        let checks = verify::verify_file(&a.file)?;
        let failed = checks.iter().filter(|c| !c.ok).count();
        for c in &checks {
            println!("{} {}: {}", painted(c.ok), c.name, c.detail);
        }
        return if failed == 0 { Ok(()) } else { Err(CliError::Verification(failed)) };
    }
    let start = Instant::now();
    let inputs = cli.command.inputs();
    let artifacts = execute(&cli.command)?;
    emit(&artifacts)?;
    if let Some(path) = &cli.manifest {
        let inputs = inputs
            .into_iter()
            .map(|(flag, p)| {
                let bytes = std::fs::read(&p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                Ok(FileDigest { flag: flag.into(), path: Some(p.display().to_string()), sha256: sha256_hex(&bytes) })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let manifest = RunManifest {
            subcommand: cli.command.name().into(),
            argv: replay_argv(),
            cwd: std::env::current_dir().map(|d| d.display().to_string()).unwrap_or_default(),
            seed: cli.command.seed(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_time_s: start.elapsed().as_secs_f64(),
            inputs,
            outputs: artifacts
                .iter()
                .map(|a| FileDigest {
                    flag: a.flag.into(),
                    path: a.path.as_ref().map(|p| p.display().to_string()),
                    sha256: sha256_hex(&a.bytes),
                })
                .collect(),
        };
        write_atomic(path, &Envelope::new(Document::Manifest(manifest)).to_bytes())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mdisc: {e}");
            ExitCode::from(e.code())
        }
    }
}
