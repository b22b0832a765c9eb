use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

mod commands;

use commands::{CheckArgs, EvalArgs, LearnArgs, SummarizeArgs, SynthArgs, TaskArgs};

#[derive(Parser)]
#[command(name = "subinfo", version, about = "Targeted summarization with submodular information measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Greedy summary of one collection under a flavor.
    Summarize(SummarizeArgs),
    /// Train a mixture of measures on a directory of collections.
    Learn(LearnArgs),
    /// Score a summary against reference summaries.
    Eval(EvalArgs),
    /// Behavior studies on the 2-D synthetic instance.
    Synth(SynthArgs),
    /// Write a synthetic learning task as collection files.
    Task(TaskArgs),
    /// Self-checks against the definitional oracles.
    Check(CheckArgs),
}

/// How a subcommand ended when it did not fail outright.
pub enum Outcome {
    Done,
    CheckFailed(String),
}

/// Echo of a run, written next to its outputs.
#[derive(Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub version: &'a str,
    pub config: &'a C,
    pub outputs: Vec<String>,
}

pub fn write_manifest<C: Serialize>(path: &Path, command: &str, config: &C, outputs: &[&Path]) -> subinfo::Result<()> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
    };
    write_file(path, serde_json::to_string_pretty(&m)? + "\n")
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> subinfo::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| io_error(path, e))
}

pub fn io_error(path: &Path, source: std::io::Error) -> subinfo::Error {
    subinfo::Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `model.json` → `model.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn exit_code(err: &subinfo::Error) -> u8 {
    use subinfo::Error::*;
    match err {
        Numeric(_) | Degenerate(_) => 3,
        _ => 2,
    }
}

fn setup_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("SUBMOD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("SUBMOD_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = setup_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Summarize(a) => commands::summarize(&a),
        Command::Learn(a) => commands::learn(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Task(a) => commands::task(&a),
        Command::Check(a) => commands::check(&a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed(msg)) => {
            eprintln!("check failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
