//! Command-line front end for the vanishing-point scene completion pipeline.
//!
//! Exit codes: 0 success, 2 unreadable or malformed input (files, flags,
//! config), 3 geometric or shape errors on well-formed input.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] vpscene::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Core(e) if e.is_input_error() => 2,
            CliError::Core(vpscene::Error::UnknownStrategy { .. }) => 2,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vpscene", version, about = "Vanishing-point guided monocular scene completion")]
pub struct Cli {
    /// `key=value` defaults; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the zoom-in image toward the vanishing point.
    Zoom(commands::ZoomArgs),
    /// Print the 27 VP-guided sampling points for one reference point.
    Sample(commands::SampleArgs),
    /// Lift image features into original and zoom voxel volumes.
    Lift(commands::LiftArgs),
    /// Fuse two voxel volumes and emit a semantic grid.
    Fuse(commands::FuseArgs),
    /// Per-depth-band pixel counts before and after zooming.
    Density(commands::DensityArgs),
    /// Render a synthetic road scene with depth, VP and calibration.
    Synth(commands::SynthArgs),
    /// Stand-in encoder: image to a three-level feature pyramid.
    Features(commands::FeaturesArgs),
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Zoom(a) => commands::zoom(&a, &mut cfg),
        Command::Sample(a) => commands::sample(&a, &mut cfg),
        Command::Lift(a) => commands::lift(&a, &mut cfg),
        Command::Fuse(a) => commands::fuse(&a, &mut cfg),
        Command::Density(a) => commands::density(&a, &mut cfg),
        Command::Synth(a) => commands::synth(&a),
        Command::Features(a) => commands::features(&a, &mut cfg),
    })
}

/// Parses `args`, runs, reports errors on stderr, returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
