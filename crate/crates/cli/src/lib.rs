//! Command-line front end: seeded experiments with CSV, JSON and JSONL output.

pub mod commands;
pub mod config;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use commands::{cmd_construct, cmd_entropy, cmd_rotation_set, cmd_simulate, construct_word, Constructed};
pub use config::{Cli, Command, CommonArgs, Overrides, RunConfig};

use torus_billiard::flow::FlowError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Flow(#[from] FlowError),
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io { path: path.as_ref().to_path_buf(), source }
    }

    /// 2 for configuration errors, 3 for failed constructions, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Construction(_) => 3,
            _ => 1,
        }
    }
}

/// Resolves the configuration and runs the subcommand on a pool of
/// `jobs` workers.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.command.overrides())?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        builder = builder.num_threads(j);
    }
    let pool = builder.build().map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let mut buf = Vec::new();
    pool.install(|| match &cli.command {
        Command::Simulate { .. } => cmd_simulate(&cfg, &mut buf),
        Command::Construct { .. } => cmd_construct(&cfg, &mut buf).map(|_| ()),
        Command::RotationSet { .. } => cmd_rotation_set(&cfg, &mut buf).map(|_| ()),
        Command::Entropy { .. } => cmd_entropy(&cfg, &mut buf).map(|_| ()),
    })?;
    out.write_all(&buf).map_err(|e| CliError::io("<stdout>", e))
}
